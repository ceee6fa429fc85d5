//! The three interchangeable differentiation backends: central finite
//! differences, pseudo-spectral, and Fourier extension.
//!
//! Space is periodic, so both spectral backends differentiate in space with
//! FFTs. They differ only in time: the pseudo-spectral backend uses central
//! differences across frames, Fourier extension zero-pads the frame axis and
//! differentiates spectrally on the padded (now periodic) series.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{Array3, ArrayView3, Axis as NdAxis};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::SpatialForm;
use crate::fdm::fdm_deriv;
use crate::grid::{Axis, Grid2D, ScalarField2D};
use crate::spectral::{derivative_multiplier, Spectral};

/// Default zero-pad length (in frames) for Fourier extension; about a quarter
/// of a 100-frame trajectory.
pub const DEFAULT_EXTENSION_PAD: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BackendKind {
    #[serde(rename = "fdm")]
    FdmCentral,
    #[serde(rename = "pseudo")]
    PseudoSpectral,
    #[serde(rename = "fext")]
    FourierExtension,
}

impl BackendKind {
    pub const ALL: [BackendKind; 3] = [
        BackendKind::FdmCentral,
        BackendKind::PseudoSpectral,
        BackendKind::FourierExtension,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            BackendKind::FdmCentral => "fdm",
            BackendKind::PseudoSpectral => "pseudo",
            BackendKind::FourierExtension => "fext",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            BackendKind::FdmCentral => "FDM (central)",
            BackendKind::PseudoSpectral => "Pseudo-spectral",
            BackendKind::FourierExtension => "Fourier extension",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fdm" | "fdm-central" | "central" => Ok(BackendKind::FdmCentral),
            "pseudo" | "pseudo-spectral" | "spectral" => Ok(BackendKind::PseudoSpectral),
            "fext" | "fourier-extension" => Ok(BackendKind::FourierExtension),
            other => Err(Error::invalid(format!(
                "unknown backend '{other}' (expected fdm, pseudo or fext)"
            ))),
        }
    }
}

/// A differentiation backend. `pad` is only meaningful for Fourier extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivBackend {
    pub kind: BackendKind,
    #[serde(default = "default_pad")]
    pub pad: usize,
}

fn default_pad() -> usize {
    DEFAULT_EXTENSION_PAD
}

impl Default for DerivBackend {
    fn default() -> Self {
        Self::pseudo_spectral()
    }
}

impl DerivBackend {
    pub fn fdm() -> Self {
        Self {
            kind: BackendKind::FdmCentral,
            pad: 0,
        }
    }

    pub fn pseudo_spectral() -> Self {
        Self {
            kind: BackendKind::PseudoSpectral,
            pad: 0,
        }
    }

    pub fn fourier_extension(pad: usize) -> Result<Self> {
        let b = Self {
            kind: BackendKind::FourierExtension,
            pad,
        };
        b.validate()?;
        Ok(b)
    }

    /// Backend of the given kind with default settings.
    pub fn of_kind(kind: BackendKind) -> Self {
        match kind {
            BackendKind::FdmCentral => Self::fdm(),
            BackendKind::PseudoSpectral => Self::pseudo_spectral(),
            BackendKind::FourierExtension => Self {
                kind,
                pad: DEFAULT_EXTENSION_PAD,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == BackendKind::FourierExtension && self.pad == 0 {
            return Err(Error::invalid("Fourier extension needs pad >= 1"));
        }
        Ok(())
    }
}

fn check_time_args(len: usize, dt: f64) -> Result<()> {
    if len < 3 {
        return Err(Error::invalid(format!(
            "time derivative needs at least 3 frames, got {len}"
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

/// Central differences inside, second-order one-sided stencils at both ends.
fn central_in_time(series: &[f64], dt: f64, out: &mut [f64]) {
    let n = series.len();
    let s = 1.0 / (2.0 * dt);
    out[0] = (-3.0 * series[0] + 4.0 * series[1] - series[2]) * s;
    for t in 1..n - 1 {
        out[t] = (series[t + 1] - series[t - 1]) * s;
    }
    out[n - 1] = (3.0 * series[n - 1] - 4.0 * series[n - 2] + series[n - 3]) * s;
}

struct ExtensionPlan {
    fwd: Arc<dyn rustfft::Fft<f64>>,
    inv: Arc<dyn rustfft::Fft<f64>>,
    multipliers: Vec<Complex64>,
    len: usize,
}

impl ExtensionPlan {
    fn new(frames: usize, pad: usize, dt: f64) -> Self {
        let len = frames + pad;
        let mut planner = FftPlanner::new();
        let period = len as f64 * dt;
        let multipliers = (0..len)
            .map(|m| {
                let freq = if m < len.div_ceil(2) {
                    m as f64
                } else {
                    m as f64 - len as f64
                };
                let k = 2.0 * std::f64::consts::PI * freq / period;
                derivative_multiplier(k, 1, len.is_multiple_of(2) && m == len / 2)
            })
            .collect();
        Self {
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
            multipliers,
            len,
        }
    }

    fn apply(&self, series: &[f64], buf: &mut Vec<Complex64>, out: &mut [f64]) {
        buf.clear();
        buf.extend(series.iter().map(|&v| Complex64::new(v, 0.0)));
        buf.resize(self.len, Complex64::new(0.0, 0.0));
        self.fwd.process(buf);
        for (z, m) in buf.iter_mut().zip(&self.multipliers) {
            *z *= m;
        }
        self.inv.process(buf);
        let scale = 1.0 / self.len as f64;
        for (o, z) in out.iter_mut().zip(buf.iter()) {
            *o = z.re * scale;
        }
    }
}

/// First time derivative of a single series of frames.
pub fn time_deriv(series: &[f64], dt: f64, backend: &DerivBackend) -> Result<Vec<f64>> {
    check_time_args(series.len(), dt)?;
    backend.validate()?;
    if let Some(bad) = series.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("time series (value {bad})"),
        });
    }
    let mut out = vec![0.0; series.len()];
    match backend.kind {
        BackendKind::FdmCentral | BackendKind::PseudoSpectral => {
            central_in_time(series, dt, &mut out)
        }
        BackendKind::FourierExtension => {
            let plan = ExtensionPlan::new(series.len(), backend.pad, dt);
            plan.apply(series, &mut Vec::with_capacity(plan.len), &mut out);
        }
    }
    Ok(out)
}

/// Time derivative of a `(T, nx, ny)` stack, applied independently per pixel.
pub fn time_deriv_stack(
    stack: ArrayView3<'_, f64>,
    dt: f64,
    backend: &DerivBackend,
) -> Result<Array3<f64>> {
    let (frames, nx, ny) = stack.dim();
    check_time_args(frames, dt)?;
    backend.validate()?;
    let plan = match backend.kind {
        BackendKind::FourierExtension => Some(ExtensionPlan::new(frames, backend.pad, dt)),
        _ => None,
    };
    // pixel-major copy so each series is contiguous
    let pixels = stack
        .view()
        .into_shape_with_order((frames, nx * ny))
        .map_err(|e| Error::invalid(e.to_string()))?;
    let pixels = pixels.t().as_standard_layout().into_owned();
    let mut derived = ndarray::Array2::<f64>::zeros((nx * ny, frames));
    derived
        .axis_iter_mut(NdAxis(0))
        .into_par_iter()
        .zip(pixels.axis_iter(NdAxis(0)).into_par_iter())
        .for_each_init(Vec::new, |buf, (mut out, series)| {
            let series = series.as_slice().expect("contiguous");
            let out = out.as_slice_mut().expect("contiguous");
            match &plan {
                Some(plan) => plan.apply(series, buf, out),
                None => central_in_time(series, dt, out),
            }
        });
    let derived = derived.t().as_standard_layout().into_owned();
    derived
        .into_shape_with_order((frames, nx, ny))
        .map_err(|e| Error::invalid(e.to_string()))
}

/// Spatial differentiation dispatch shared by the residual engine.
#[derive(Debug, Clone)]
pub enum SpatialOps {
    Fdm(Arc<Grid2D>),
    Spectral(Spectral),
}

impl SpatialOps {
    pub fn new(kind: BackendKind, grid: Arc<Grid2D>) -> Self {
        match kind {
            BackendKind::FdmCentral => SpatialOps::Fdm(grid),
            BackendKind::PseudoSpectral | BackendKind::FourierExtension => {
                SpatialOps::Spectral(Spectral::new(grid))
            }
        }
    }

    pub fn deriv(&self, f: &ScalarField2D, axis: Axis, order: u32) -> Result<ScalarField2D> {
        match self {
            SpatialOps::Fdm(_) => fdm_deriv(f, axis, order),
            SpatialOps::Spectral(s) => s.deriv(f, axis, order),
        }
    }

    /// `∂²f/∂x² + ∂²f/∂y²`.
    pub fn laplacian(&self, f: &ScalarField2D) -> Result<ScalarField2D> {
        match self {
            SpatialOps::Fdm(_) => {
                let dxx = fdm_deriv(f, Axis::X, 2)?;
                let dyy = fdm_deriv(f, Axis::Y, 2)?;
                Ok(add(&dxx, &dyy, 1.0))
            }
            SpatialOps::Spectral(s) => {
                s.check_grid(f)?;
                Ok(s.laplacian(f))
            }
        }
    }

    /// Fourth-order gradient operator of the Cahn-Hilliard equation:
    /// `∂⁴/∂x⁴ + ∂⁴/∂y⁴` (axis) or the full biharmonic `∇⁴`.
    pub fn fourth_order(&self, f: &ScalarField2D, form: SpatialForm) -> Result<ScalarField2D> {
        match self {
            SpatialOps::Fdm(_) => {
                let dxxxx = fdm_deriv(f, Axis::X, 4)?;
                let dyyyy = fdm_deriv(f, Axis::Y, 4)?;
                let sum = add(&dxxxx, &dyyyy, 1.0);
                match form {
                    SpatialForm::AxisQuartic => Ok(sum),
                    SpatialForm::FullBiharmonic => {
                        let mixed = fdm_deriv(&fdm_deriv(f, Axis::X, 2)?, Axis::Y, 2)?;
                        Ok(add(&sum, &mixed, 2.0))
                    }
                }
            }
            SpatialOps::Spectral(s) => {
                s.check_grid(f)?;
                let (kx, ky) = (s.grid().kx(), s.grid().ky());
                Ok(s
                    .apply_symbol(f, |i, j| {
                        Complex64::new(form.fourth_order_symbol(kx[i], ky[j]), 0.0)
                    })
                    .0)
            }
        }
    }
}

/// `a + scale · b`.
pub(crate) fn add(a: &ScalarField2D, b: &ScalarField2D, scale: f64) -> ScalarField2D {
    let mut v = a.values().clone();
    v.scaled_add(scale, b.values());
    ScalarField2D::from_parts(a.grid().clone(), v)
}
