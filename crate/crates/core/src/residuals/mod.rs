//! Physics residuals of the Cahn-Hilliard and Allen-Cahn equations, the
//! relative-L2 data metric, and the six-term weighted loss.
//!
//! Reduction order is fixed: squared residuals are summed per frame in
//! row-major order, the per-frame sums are then added in frame order, and the
//! weighted total adds the components in [`LossComponents::LABELS`] order.
//! Frames may be evaluated in parallel without changing any result bit.

pub mod manufactured;

use ndarray::{Array2, Array3, Axis as NdAxis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{add, time_deriv_stack, DerivBackend, SpatialOps};
use crate::energetics::{df_dc, df_deta, ElasticKernel, Variant};
use crate::error::{Error, Result};
use crate::evolution::{Channel, FieldSet, SpatialForm, Trajectory};
use crate::grid::{Axis, ScalarField2D};
use crate::spectral::Spectral;

/// Pointwise residual of one equation over every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    /// `(T, nx, ny)`.
    pub values: Array3<f64>,
    /// Mean square of the time-derivative term, used to normalize the loss.
    pub rate_mean_square: f64,
}

impl Residual {
    pub fn mean_square(&self) -> f64 {
        mean_square(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `mean(R²) / mean((∂u/∂t)²)`, or the plain `mean(R²)` when the field
    /// does not change at all.
    pub fn normalized_loss(&self) -> f64 {
        let ms = self.mean_square();
        if self.rate_mean_square > 0.0 {
            ms / self.rate_mean_square
        } else {
            ms
        }
    }
}

fn mean_square(a: &Array3<f64>) -> f64 {
    let per_frame: Vec<f64> = a
        .axis_iter(NdAxis(0))
        .map(|frame| frame.iter().map(|v| v * v).sum::<f64>())
        .collect();
    per_frame.iter().sum::<f64>() / a.len() as f64
}

fn check_input(traj: &Trajectory) -> Result<()> {
    if !traj.is_finite() {
        return Err(Error::NonFinite {
            context: "trajectory passed to the residual engine".into(),
        });
    }
    Ok(())
}

fn assemble(
    traj: &Trajectory,
    rate: Array3<f64>,
    sign: f64,
    spatial: impl Fn(&FieldSet) -> Result<Array2<f64>> + Sync,
) -> Result<Residual> {
    let parts = traj
        .frames()
        .par_iter()
        .map(&spatial)
        .collect::<Result<Vec<_>>>()?;
    let rate_mean_square = mean_square(&rate);
    let mut values = rate;
    for (mut slot, part) in values.axis_iter_mut(NdAxis(0)).zip(&parts) {
        slot.scaled_add(sign, part);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "residual".into(),
        });
    }
    Ok(Residual {
        values,
        rate_mean_square,
    })
}

/// `R = ∂c/∂t − M[Dxx + Dyy](∂f/∂c) + 2κ_c M K₄(c)`.
///
/// A composition-dependent mobility is evaluated in divergence form,
/// `R = ∂c/∂t − ∂x(M ∂x μx) − ∂y(M ∂y μy)` with `μ = ∂f/∂c − 2κ_c D²c`, matching
/// the integrator.
pub fn ch_residual(traj: &Trajectory, backend: &DerivBackend, form: SpatialForm) -> Result<Residual> {
    backend.validate()?;
    check_input(traj)?;
    let p = traj.params();
    let ops = SpatialOps::new(backend.kind, traj.grid().clone());
    let rate = time_deriv_stack(traj.channel_stack(Channel::C).view(), traj.dt(), backend)?;
    let mobility = p.mobility.as_constant();
    assemble(traj, rate, -1.0, |f| {
        let fc = df_dc(&f.c, &f.eta1, &f.eta2, &p.bulk)?;
        let out = match mobility {
            Some(m) => {
                let lap = add(&ops.deriv(&fc, Axis::X, 2)?, &ops.deriv(&fc, Axis::Y, 2)?, 1.0);
                let k4 = ops.fourth_order(&f.c, form)?;
                let mut v = lap.into_values() * m;
                v.scaled_add(-2.0 * p.kappa_c * m, k4.values());
                v
            }
            None => {
                let (mu_x, mu_y) = match form {
                    SpatialForm::FullBiharmonic => {
                        let mu = add(&fc, &ops.laplacian(&f.c)?, -2.0 * p.kappa_c);
                        (mu.clone(), mu)
                    }
                    SpatialForm::AxisQuartic => (
                        add(&fc, &ops.deriv(&f.c, Axis::X, 2)?, -2.0 * p.kappa_c),
                        add(&fc, &ops.deriv(&f.c, Axis::Y, 2)?, -2.0 * p.kappa_c),
                    ),
                };
                let m = f.c.map(|c| p.mobility.eval(c));
                let flux = |mu: &ScalarField2D, axis| -> Result<ScalarField2D> {
                    let g = ops.deriv(mu, axis, 1)?;
                    let weighted = ScalarField2D::new(f.c.grid().clone(), g.values() * m.values())?;
                    ops.deriv(&weighted, axis, 1)
                };
                add(&flux(&mu_x, Axis::X)?, &flux(&mu_y, Axis::Y)?, 1.0).into_values()
            }
        };
        Ok(out)
    })
}

/// `R = ∂ηᵢ/∂t + L[∂f/∂ηᵢ − 2κ_η(Dxx + Dyy)ηᵢ + δF_el/δηᵢ]`.
///
/// The elastic driving force is always evaluated spectrally: the kernel only
/// exists in Fourier space.
pub fn ac_residual(traj: &Trajectory, variant: Variant, backend: &DerivBackend) -> Result<Residual> {
    backend.validate()?;
    check_input(traj)?;
    let p = traj.params();
    let grid = traj.grid().clone();
    let ops = SpatialOps::new(backend.kind, grid.clone());
    let kernel = ElasticKernel::new(grid.clone(), &p.elastic)?;
    let spectral = kernel.is_active().then(|| Spectral::new(grid));
    let rate = time_deriv_stack(traj.channel_stack(variant.into()).view(), traj.dt(), backend)?;
    assemble(traj, rate, 1.0, |f| {
        let eta = f.eta(variant);
        let mut drive = df_deta(&f.c, &f.eta1, &f.eta2, &p.bulk, variant)?.into_values();
        drive.scaled_add(-2.0 * p.kappa_eta, ops.laplacian(eta)?.values());
        if let Some(s) = &spectral {
            let (el1, el2) = kernel.driving_force(s, &f.eta1, &f.eta2)?;
            let el = match variant {
                Variant::One => el1,
                Variant::Two => el2,
            };
            drive += el.values();
        }
        Ok(drive * p.kinetic_l)
    })
}

/// `‖pred − truth‖₂ / ‖truth‖₂` over the whole `(T, nx, ny)` tensor of one
/// channel. Identical inputs give 0 even when the truth is all zeros.
pub fn data_loss(pred: &Trajectory, truth: &Trajectory, channel: Channel) -> Result<f64> {
    if !pred.same_shape(truth) {
        return Err(Error::invalid(format!(
            "shape mismatch: prediction is {}x{:?}, truth is {}x{:?}",
            pred.len(),
            pred.grid().shape(),
            truth.len(),
            truth.grid().shape()
        )));
    }
    let (mut diff, mut norm) = (0.0, 0.0);
    for (p, t) in pred.frames().iter().zip(truth.frames()) {
        for (a, b) in p.channel(channel).values().iter().zip(t.channel(channel).values()) {
            diff += (a - b) * (a - b);
            norm += b * b;
        }
    }
    if !(diff.is_finite() && norm.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("data loss of channel {channel}"),
        });
    }
    if diff == 0.0 {
        return Ok(0.0);
    }
    if norm == 0.0 {
        return Err(Error::UndefinedMetric(format!(
            "relative L2 error of channel {channel}: truth has zero norm"
        )));
    }
    Ok((diff / norm).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub w_data_c: f64,
    pub w_data_eta1: f64,
    pub w_data_eta2: f64,
    pub w_pde_ch: f64,
    pub w_pde_ac1: f64,
    pub w_pde_ac2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_data_c: 1.0,
            w_data_eta1: 1.0,
            w_data_eta2: 1.0,
            w_pde_ch: 0.1,
            w_pde_ac1: 1.0,
            w_pde_ac2: 1.0,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self::from_array([0.0; 6])
    }

    /// Weights in [`LossComponents::LABELS`] order.
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.w_data_eta1,
            self.w_data_eta2,
            self.w_data_c,
            self.w_pde_ac1,
            self.w_pde_ac2,
            self.w_pde_ch,
        ]
    }

    pub fn from_array(w: [f64; 6]) -> Self {
        Self {
            w_data_eta1: w[0],
            w_data_eta2: w[1],
            w_data_c: w[2],
            w_pde_ac1: w[3],
            w_pde_ac2: w[4],
            w_pde_ch: w[5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.as_array().iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            Some(w) => Err(Error::invalid(format!("loss weights must be finite and >= 0, got {w}"))),
            None => Ok(()),
        }
    }

    pub fn needs_truth(&self) -> bool {
        self.w_data_c > 0.0 || self.w_data_eta1 > 0.0 || self.w_data_eta2 > 0.0
    }
}

/// The six loss terms, in the column order of the backend comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossComponents {
    pub data_eta1: f64,
    pub data_eta2: f64,
    pub data_c: f64,
    pub pde_ac1: f64,
    pub pde_ac2: f64,
    pub pde_ch: f64,
}

impl LossComponents {
    pub const LABELS: [&'static str; 6] = [
        "data_eta1",
        "data_eta2",
        "data_c",
        "pde_ac1",
        "pde_ac2",
        "pde_ch",
    ];

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.data_eta1,
            self.data_eta2,
            self.data_c,
            self.pde_ac1,
            self.pde_ac2,
            self.pde_ch,
        ]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            data_eta1: v[0],
            data_eta2: v[1],
            data_c: v[2],
            pde_ac1: v[3],
            pde_ac2: v[4],
            pde_ch: v[5],
        }
    }

    /// `Σ w·ℓ`, left to right in [`Self::LABELS`] order. Zero-weight terms are
    /// skipped so they cannot contribute even when non-finite.
    pub fn weighted_total(&self, weights: &LossWeights) -> f64 {
        self.as_array()
            .iter()
            .zip(weights.as_array())
            .filter(|(_, w)| *w != 0.0)
            .fold(0.0, |acc, (l, w)| acc + w * l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub components: LossComponents,
    pub weights: LossWeights,
    pub total: f64,
    pub backend: DerivBackend,
    /// Fourth-order operator used for the CH residual.
    pub spatial_form: SpatialForm,
    /// Set when `spatial_form` differs from the one the trajectory was
    /// simulated with.
    pub form_mismatch: bool,
    /// Whether data losses were computed (a truth trajectory was supplied).
    pub has_truth: bool,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub frames: usize,
    pub dt: f64,
}

/// Six-term loss with the CH operator recorded in `pred`'s parameters.
pub fn total_loss(
    pred: &Trajectory,
    truth: Option<&Trajectory>,
    weights: &LossWeights,
    backend: &DerivBackend,
) -> Result<LossReport> {
    total_loss_with_form(pred, truth, weights, backend, pred.params().ch_spatial_form)
}

pub fn total_loss_with_form(
    pred: &Trajectory,
    truth: Option<&Trajectory>,
    weights: &LossWeights,
    backend: &DerivBackend,
    form: SpatialForm,
) -> Result<LossReport> {
    weights.validate()?;
    backend.validate()?;
    if truth.is_none() && weights.needs_truth() {
        return Err(Error::MissingTruth);
    }
    let mut c = LossComponents {
        pde_ch: ch_residual(pred, backend, form)?.normalized_loss(),
        pde_ac1: ac_residual(pred, Variant::One, backend)?.normalized_loss(),
        pde_ac2: ac_residual(pred, Variant::Two, backend)?.normalized_loss(),
        ..Default::default()
    };
    if let Some(truth) = truth {
        c.data_c = data_loss(pred, truth, Channel::C)?;
        c.data_eta1 = data_loss(pred, truth, Channel::Eta1)?;
        c.data_eta2 = data_loss(pred, truth, Channel::Eta2)?;
    }
    let g = pred.grid();
    Ok(LossReport {
        total: c.weighted_total(weights),
        components: c,
        weights: *weights,
        backend: *backend,
        spatial_form: form,
        form_mismatch: form != pred.params().ch_spatial_form,
        has_truth: truth.is_some(),
        nx: g.nx(),
        ny: g.ny(),
        lx: g.lx(),
        ly: g.ly(),
        frames: pred.len(),
        dt: pred.dt(),
    })
}

/// One report per backend, in the order given.
pub fn compare_backends(
    pred: &Trajectory,
    truth: Option<&Trajectory>,
    weights: &LossWeights,
    backends: &[DerivBackend],
) -> Result<Vec<LossReport>> {
    backends
        .iter()
        .map(|b| total_loss(pred, truth, weights, b))
        .collect()
}
