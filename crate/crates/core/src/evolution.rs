//! Semi-implicit Fourier-spectral integration of the coupled
//! Cahn-Hilliard (composition) / Allen-Cahn (two order parameters) system:
//!
//! ```text
//! ∂c/∂t  = M [∂²/∂x² + ∂²/∂y²](∂f/∂c) − 2κ_c M K₄c
//! ∂ηᵢ/∂t = −L [∂f/∂ηᵢ − 2κ_η ∇²ηᵢ + δF_el/δηᵢ]
//! ```
//!
//! `K₄` is either `∂⁴/∂x⁴ + ∂⁴/∂y⁴` ([`SpatialForm::AxisQuartic`]) or the
//! full biharmonic `∇⁴` ([`SpatialForm::FullBiharmonic`]). Stiff linear terms
//! are implicit, everything else is explicit at the current state.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{Array2, Array3, Axis as NdAxis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energetics::{df_dc, df_deta, BulkCoeffs, ElasticKernel, ElasticModel, Variant};
use crate::error::{Error, Result};
use crate::grid::{Axis, Grid2D, ScalarField2D};
use crate::spectral::Spectral;

/// Soft physical bounds on the composition; leaving them only logs a warning.
pub const COMPOSITION_SOFT_BOUNDS: (f64, f64) = (-0.1, 1.1);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpatialForm {
    /// `∂⁴c/∂x⁴ + ∂⁴c/∂y⁴`, without the mixed term.
    #[serde(rename = "axis", alias = "paper")]
    AxisQuartic,
    /// `∇⁴c = ∂⁴c/∂x⁴ + 2∂⁴c/∂x²∂y² + ∂⁴c/∂y⁴`.
    #[default]
    #[serde(rename = "biharmonic")]
    FullBiharmonic,
}

impl SpatialForm {
    pub fn fourth_order_symbol(self, kx: f64, ky: f64) -> f64 {
        match self {
            SpatialForm::AxisQuartic => kx.powi(4) + ky.powi(4),
            SpatialForm::FullBiharmonic => (kx * kx + ky * ky).powi(2),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            SpatialForm::AxisQuartic => "axis",
            SpatialForm::FullBiharmonic => "biharmonic",
        }
    }
}

impl fmt::Display for SpatialForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for SpatialForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "axis" | "paper" => Ok(SpatialForm::AxisQuartic),
            "biharmonic" | "full-biharmonic" => Ok(SpatialForm::FullBiharmonic),
            other => Err(Error::invalid(format!(
                "unknown spatial form '{other}' (expected axis or biharmonic)"
            ))),
        }
    }
}

/// Cahn-Hilliard mobility: a constant, or a polynomial `Σ a_j c^j` in the
/// local composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Mobility {
    Constant(f64),
    Polynomial(Vec<f64>),
}

impl Default for Mobility {
    fn default() -> Self {
        Mobility::Constant(1.0)
    }
}

impl Mobility {
    pub fn eval(&self, c: f64) -> f64 {
        match self {
            Mobility::Constant(m) => *m,
            Mobility::Polynomial(a) => a.iter().rev().fold(0.0, |acc, &coef| acc * c + coef),
        }
    }

    /// The constant value, if the mobility does not depend on `c`.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Mobility::Constant(m) => Some(*m),
            Mobility::Polynomial(a) if a.iter().skip(1).all(|&v| v == 0.0) => {
                Some(a.first().copied().unwrap_or(0.0))
            }
            Mobility::Polynomial(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = COMPOSITION_SOFT_BOUNDS;
        let positive = (0..=120)
            .map(|s| lo + (hi - lo) * s as f64 / 120.0)
            .all(|c| {
                let m = self.eval(c);
                m.is_finite() && m > 0.0
            });
        if positive {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "mobility must be finite and positive for c in [{lo}, {hi}]"
            )))
        }
    }
}

/// Physical coefficients and numerical controls of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub mobility: Mobility,
    pub kinetic_l: f64,
    pub kappa_c: f64,
    pub kappa_eta: f64,
    pub bulk: BulkCoeffs,
    pub elastic: ElasticModel,
    pub dt: f64,
    pub ch_spatial_form: SpatialForm,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            mobility: Mobility::default(),
            kinetic_l: 1.0,
            kappa_c: 1.0,
            kappa_eta: 1.0,
            bulk: BulkCoeffs::default(),
            elastic: ElasticModel::default(),
            dt: 0.05,
            ch_spatial_form: SpatialForm::FullBiharmonic,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        self.mobility.validate()?;
        for (name, v) in [
            ("kinetic_l", self.kinetic_l),
            ("kappa_c", self.kappa_c),
            ("kappa_eta", self.kappa_eta),
            ("dt", self.dt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        self.bulk.validate()?;
        self.elastic.validate()
    }

    /// The same parameters with the two variants' eigenstrains exchanged.
    pub fn with_swapped_variants(&self) -> Self {
        Self {
            elastic: self.elastic.swapped(),
            ..self.clone()
        }
    }
}

/// The three field channels of a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    C,
    Eta1,
    Eta2,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::C, Channel::Eta1, Channel::Eta2];

    pub fn name(self) -> &'static str {
        match self {
            Channel::C => "c",
            Channel::Eta1 => "eta1",
            Channel::Eta2 => "eta2",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c" => Ok(Channel::C),
            "eta1" => Ok(Channel::Eta1),
            "eta2" => Ok(Channel::Eta2),
            other => Err(Error::invalid(format!("unknown channel '{other}'"))),
        }
    }
}

impl From<Variant> for Channel {
    fn from(v: Variant) -> Self {
        match v {
            Variant::One => Channel::Eta1,
            Variant::Two => Channel::Eta2,
        }
    }
}

/// One time slice of `(c, η₁, η₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet {
    pub c: ScalarField2D,
    pub eta1: ScalarField2D,
    pub eta2: ScalarField2D,
    pub time: f64,
}

impl FieldSet {
    pub fn new(c: ScalarField2D, eta1: ScalarField2D, eta2: ScalarField2D, time: f64) -> Result<Self> {
        c.check_same_grid(&[&eta1, &eta2])?;
        let set = Self { c, eta1, eta2, time };
        set.ensure_finite("field set")?;
        Ok(set)
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        self.c.grid()
    }

    pub fn channel(&self, ch: Channel) -> &ScalarField2D {
        match ch {
            Channel::C => &self.c,
            Channel::Eta1 => &self.eta1,
            Channel::Eta2 => &self.eta2,
        }
    }

    pub fn eta(&self, v: Variant) -> &ScalarField2D {
        self.channel(v.into())
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite() && Channel::ALL.iter().all(|&ch| self.channel(ch).is_finite())
    }

    pub(crate) fn ensure_finite(&self, context: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite {
                context: context.to_string(),
            })
        }
    }

    fn max_abs(&self) -> f64 {
        Channel::ALL
            .iter()
            .flat_map(|&ch| self.channel(ch).values().iter())
            .fold(0.0_f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) })
    }

    /// `η₁` and `η₂` exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            c: self.c.clone(),
            eta1: self.eta2.clone(),
            eta2: self.eta1.clone(),
            time: self.time,
        }
    }

    /// All channels shifted periodically by whole cells.
    pub fn roll(&self, di: isize, dj: isize) -> Self {
        Self {
            c: self.c.roll(di, dj),
            eta1: self.eta1.roll(di, dj),
            eta2: self.eta2.roll(di, dj),
            time: self.time,
        }
    }
}

/// `T` frames at uniform spacing `dt`, with the parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    frames: Vec<FieldSet>,
    dt: f64,
    params: SimParams,
}

impl Trajectory {
    pub fn new(frames: Vec<FieldSet>, dt: f64, params: SimParams) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::invalid(format!(
                "trajectory needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("frame spacing must be positive, got {dt}")));
        }
        let first = &frames[0];
        let t0 = first.time;
        for (j, f) in frames.iter().enumerate() {
            first.c.check_same_grid(&[&f.c])?;
            let expect = t0 + j as f64 * dt;
            if (f.time - expect).abs() > 1e-9 * expect.abs().max(1.0) {
                return Err(Error::invalid(format!(
                    "frame {j} has time {} but uniform spacing implies {expect}",
                    f.time
                )));
            }
        }
        Ok(Self { frames, dt, params })
    }

    /// Builds a trajectory from `(T, nx, ny)` stacks of the three channels.
    pub fn from_stacks(
        grid: Arc<Grid2D>,
        stacks: [Array3<f64>; 3],
        t0: f64,
        dt: f64,
        params: SimParams,
    ) -> Result<Self> {
        let frames_n = stacks[0].dim().0;
        for s in &stacks {
            if s.dim() != (frames_n, grid.nx(), grid.ny()) {
                return Err(Error::invalid(format!(
                    "channel stack shape {:?} does not match ({frames_n}, {}, {})",
                    s.dim(),
                    grid.nx(),
                    grid.ny()
                )));
            }
        }
        let frames = (0..frames_n)
            .map(|t| {
                let [c, e1, e2] = [0, 1, 2].map(|ch| {
                    ScalarField2D::from_parts(
                        grid.clone(),
                        stacks[ch].index_axis(NdAxis(0), t).to_owned(),
                    )
                });
                FieldSet::new(c, e1, e2, t0 + t as f64 * dt)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(frames, dt, params)
    }

    pub fn frames(&self) -> &[FieldSet] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<FieldSet> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        self.frames[0].grid()
    }

    pub fn start_time(&self) -> f64 {
        self.frames[0].time
    }

    /// `(T, nx, ny)` view of one channel.
    pub fn channel_stack(&self, ch: Channel) -> Array3<f64> {
        let (nx, ny) = self.grid().shape();
        let mut out = Array3::zeros((self.len(), nx, ny));
        for (mut slot, frame) in out.axis_iter_mut(NdAxis(0)).zip(&self.frames) {
            slot.assign(frame.channel(ch).values());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.frames.iter().all(FieldSet::is_finite)
    }

    pub fn same_shape(&self, other: &Trajectory) -> bool {
        self.len() == other.len() && self.grid().shape() == other.grid().shape()
    }
}

/// Noise-seeded initial condition: `c = c₀ + U(−a, a)`, `ηᵢ = U(−a, a)`.
///
/// Each channel draws from its own ChaCha8 stream keyed by `seed`, so the
/// result depends only on `(c0, seed, grid, noise_amp)`.
pub fn make_initial(c0: f64, seed: u64, grid: Arc<Grid2D>, noise_amp: f64) -> Result<FieldSet> {
    if !(c0 > 0.0 && c0 < 1.0) {
        return Err(Error::invalid(format!("supersaturation must lie in (0, 1), got {c0}")));
    }
    if !(noise_amp >= 0.0 && noise_amp.is_finite()) {
        return Err(Error::invalid(format!("noise amplitude must be >= 0, got {noise_amp}")));
    }
    let channel = |stream: u64, base: f64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let values = Array2::from_shape_simple_fn(grid.shape(), || {
            let u: f64 = rng.gen();
            base + noise_amp * (2.0 * u - 1.0)
        });
        ScalarField2D::from_parts(grid.clone(), values)
    };
    FieldSet::new(channel(0, c0), channel(1, 0.0), channel(2, 0.0), 0.0)
}

/// One-step integrator with every grid-dependent quantity precomputed.
#[derive(Debug, Clone)]
pub struct Stepper {
    params: SimParams,
    spectral: Spectral,
    kernel: ElasticKernel,
    k2: Array2<f64>,
    k4: Array2<f64>,
    eta_denominator: Array2<f64>,
}

impl Stepper {
    pub fn new(grid: Arc<Grid2D>, params: &SimParams) -> Result<Self> {
        params.validate()?;
        let (kx, ky) = (grid.kx(), grid.ky());
        let k2 = Array2::from_shape_fn(grid.shape(), |(i, j)| kx[i] * kx[i] + ky[j] * ky[j]);
        let form = params.ch_spatial_form;
        let k4 = Array2::from_shape_fn(grid.shape(), |(i, j)| form.fourth_order_symbol(kx[i], ky[j]));
        let eta_factor = params.dt * 2.0 * params.kappa_eta * params.kinetic_l;
        let eta_denominator = k2.mapv(|k2| 1.0 + eta_factor * k2);
        Ok(Self {
            params: params.clone(),
            spectral: Spectral::new(grid.clone()),
            kernel: ElasticKernel::new(grid, &params.elastic)?,
            k2,
            k4,
            eta_denominator,
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        self.spectral.grid()
    }

    fn to_field(&self, values: Array2<f64>) -> ScalarField2D {
        ScalarField2D::from_parts(self.grid().clone(), values)
    }

    /// Advances `state` by one time step. A blowup is reported as frame 1
    /// (the state being produced); [`simulate`] substitutes the real index.
    pub fn step(&self, state: &FieldSet) -> Result<FieldSet> {
        self.step_frame(state, 1)
    }

    fn step_frame(&self, state: &FieldSet, frame: usize) -> Result<FieldSet> {
        self.spectral.check_grid(&state.c)?;
        let p = &self.params;
        let dt = p.dt;
        let c_next = match p.mobility.as_constant() {
            Some(m) => self.composition_constant(state, m)?,
            None => self.composition_variable(state)?,
        };

        let (el1, el2) = self.kernel.driving_force(&self.spectral, &state.eta1, &state.eta2)?;
        let eta_next = [(Variant::One, el1), (Variant::Two, el2)].map(|(v, el)| -> Result<_> {
            let mut drive = df_deta(&state.c, &state.eta1, &state.eta2, &p.bulk, v)?.into_values();
            drive += el.values();
            let drive_hat = self.spectral.forward(&drive);
            let mut eta_hat = self.spectral.forward(state.eta(v).values());
            Zip::from(&mut eta_hat)
                .and(&drive_hat)
                .and(&self.eta_denominator)
                .for_each(|e, &r, &den| *e = (*e - r * (dt * p.kinetic_l)) / den);
            Ok(self.to_field(self.spectral.inverse_real(eta_hat)))
        });
        let [eta1, eta2] = eta_next;
        let next = FieldSet {
            c: c_next,
            eta1: eta1?,
            eta2: eta2?,
            time: state.time + dt,
        };
        if !next.is_finite() {
            return Err(Error::Blowup {
                frame,
                magnitude: next.max_abs(),
            });
        }
        Ok(next)
    }

    /// `ĉ⁺ = (ĉ − dt M k² [∂f/∂c]^) / (1 + 2 dt κ_c M K₄)`.
    fn composition_constant(&self, state: &FieldSet, m: f64) -> Result<ScalarField2D> {
        let p = &self.params;
        let dt = p.dt;
        let mu_hat = self
            .spectral
            .forward(&df_dc(&state.c, &state.eta1, &state.eta2, &p.bulk)?.into_values());
        let mut c_hat = self.spectral.forward(state.c.values());
        let stiff = dt * 2.0 * p.kappa_c * m;
        Zip::from(&mut c_hat)
            .and(&mu_hat)
            .and(&self.k2)
            .and(&self.k4)
            .for_each(|c, &mu, &k2, &k4| *c = (*c - mu * (dt * m * k2)) / (1.0 + stiff * k4));
        Ok(self.to_field(self.spectral.inverse_real(c_hat)))
    }

    /// Divergence form `∂x(M(c) ∂x μx) + ∂y(M(c) ∂y μy)` explicit, stabilized by
    /// an implicit `2κ_c M_s K₄` term with `M_s = max M(c)`.
    fn composition_variable(&self, state: &FieldSet) -> Result<ScalarField2D> {
        let p = &self.params;
        let dt = p.dt;
        let s = &self.spectral;
        let fc = df_dc(&state.c, &state.eta1, &state.eta2, &p.bulk)?;
        let mobility = state.c.map(|c| p.mobility.eval(c));
        let m_s = mobility.values().iter().fold(0.0_f64, |a, &b| a.max(b));
        let (mu_x, mu_y) = match p.ch_spatial_form {
            SpatialForm::FullBiharmonic => {
                let mu = crate::backend::add(&fc, &s.laplacian(&state.c), -2.0 * p.kappa_c);
                (mu.clone(), mu)
            }
            SpatialForm::AxisQuartic => (
                crate::backend::add(&fc, &s.deriv(&state.c, Axis::X, 2)?, -2.0 * p.kappa_c),
                crate::backend::add(&fc, &s.deriv(&state.c, Axis::Y, 2)?, -2.0 * p.kappa_c),
            ),
        };
        let flux = |mu: &ScalarField2D, axis: Axis| -> Result<ScalarField2D> {
            let grad = s.deriv(mu, axis, 1)?;
            let weighted = self.to_field(grad.values() * mobility.values());
            s.deriv(&weighted, axis, 1)
        };
        let div = crate::backend::add(&flux(&mu_x, Axis::X)?, &flux(&mu_y, Axis::Y)?, 1.0);
        let div_hat = s.forward(div.values());
        let mut c_hat = s.forward(state.c.values());
        let stiff = dt * 2.0 * p.kappa_c * m_s;
        Zip::from(&mut c_hat)
            .and(&div_hat)
            .and(&self.k4)
            .for_each(|c, &d, &k4| {
                let lhs = 1.0 + stiff * k4;
                *c = (*c * lhs + d * dt) / lhs;
            });
        Ok(self.to_field(s.inverse_real(c_hat)))
    }
}

/// One semi-implicit step of the coupled system.
pub fn step(state: &FieldSet, params: &SimParams) -> Result<FieldSet> {
    Stepper::new(state.grid().clone(), params)?.step(state)
}

/// Runs `substeps · (n_frames − 1)` steps and keeps every `substeps`-th state.
/// Frame 0 is `initial`; frame `j` is stamped `t₀ + j · substeps · dt`.
pub fn simulate(
    initial: &FieldSet,
    params: &SimParams,
    n_frames: usize,
    substeps: usize,
) -> Result<Trajectory> {
    if n_frames < 2 {
        return Err(Error::invalid(format!("need at least 2 frames, got {n_frames}")));
    }
    if substeps == 0 {
        return Err(Error::invalid("substeps must be >= 1"));
    }
    initial.ensure_finite("initial condition")?;
    let stepper = Stepper::new(initial.grid().clone(), params)?;
    let frame_dt = params.dt * substeps as f64;
    let t0 = initial.time;
    let mut frames = Vec::with_capacity(n_frames);
    frames.push(initial.clone());
    let mut state = initial.clone();
    for frame in 1..n_frames {
        for _ in 0..substeps {
            state = stepper.step_frame(&state, frame)?;
        }
        state.time = t0 + frame as f64 * frame_dt;
        let (lo, hi) = COMPOSITION_SOFT_BOUNDS;
        let (cmin, cmax) = state
            .c
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if cmin < lo || cmax > hi {
            log::warn!("frame {frame}: composition range [{cmin:.4}, {cmax:.4}] leaves [{lo}, {hi}]");
        }
        frames.push(state.clone());
    }
    Trajectory::new(frames, frame_dt, params.clone())
}

/// Complex helper kept public for oracle code that rebuilds spectra by hand.
pub fn spectrum_of(field: &ScalarField2D) -> Array2<Complex64> {
    Spectral::new(field.grid().clone()).forward(field.values())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<Grid2D> {
        Arc::new(Grid2D::unit_square(n).unwrap())
    }

    fn no_elastic() -> SimParams {
        let mut p = SimParams::default();
        p.elastic = p.elastic.without_eigenstrain();
        p
    }

    #[test]
    fn zero_noise_gives_uniform_state() {
        let s = make_initial(0.22, 7, grid(16), 0.0).unwrap();
        assert!(s.c.values().iter().all(|&v| v == 0.22));
        assert!(s.eta1.values().iter().all(|&v| v == 0.0));
        assert!(s.eta2.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn initial_condition_is_deterministic_and_seed_dependent() {
        let a = make_initial(0.2, 494, grid(32), 0.01).unwrap();
        let b = make_initial(0.2, 494, grid(32), 0.01).unwrap();
        let c = make_initial(0.2, 1111, grid(32), 0.01).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.c, c.c);
        assert_ne!(a.eta1, a.eta2);
    }

    #[test]
    fn initial_mean_obeys_sampling_bound() {
        let g = grid(128);
        let amp = 0.01;
        let s = make_initial(0.20, 494, g.clone(), amp).unwrap();
        let bound = amp / (g.len() as f64).sqrt() * 3.0;
        assert!((s.c.mean() - 0.20).abs() < bound);
        assert!(s.c.values().iter().all(|v| (v - 0.2).abs() <= amp));
    }

    #[test]
    fn supersaturation_must_be_a_fraction() {
        assert!(make_initial(1.2, 1, grid(8), 0.01).is_err());
        assert!(make_initial(0.0, 1, grid(8), 0.01).is_err());
        assert!(make_initial(0.2, 1, grid(8), -1.0).is_err());
    }

    #[test]
    fn uniform_state_is_a_fixed_point() {
        let s = make_initial(0.2, 0, grid(32), 0.0).unwrap();
        let next = step(&s, &no_elastic()).unwrap();
        for ch in Channel::ALL {
            let diff = next
                .channel(ch)
                .values()
                .iter()
                .zip(s.channel(ch).values())
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(diff < 1e-12, "{ch}: {diff}");
        }
    }

    #[test]
    fn one_step_conserves_mean_composition() {
        let s = make_initial(0.23, 4446, grid(32), 0.05).unwrap();
        let next = step(&s, &SimParams::default()).unwrap();
        assert!((next.c.mean() - s.c.mean()).abs() < 1e-12);
    }

    #[test]
    fn single_mode_follows_semi_implicit_amplification() {
        let g = grid(32);
        let mut p = no_elastic();
        p.dt = 0.01;
        let (c0, eps) = (0.2, 1e-4);
        let kx = 2.0 * PI * 3.0 / g.lx();
        let c = ScalarField2D::from_fn(g.clone(), |x, _| c0 + eps * (kx * x).cos());
        let zero = ScalarField2D::zeros(g);
        let s = FieldSet::new(c, zero.clone(), zero, 0.0).unwrap();
        let next = step(&s, &p).unwrap();
        // linearization about (c0, 0, 0): ∂f/∂c = 2A₁c
        let m = 1.0;
        let predicted = (1.0 - p.dt * m * kx * kx * 2.0 * p.bulk.a1)
            / (1.0 + p.dt * 2.0 * p.kappa_c * m * kx.powi(4));
        let measured = (next.c.values()[[0, 0]] - c0) / eps;
        assert!((measured - predicted).abs() < 1e-6, "{measured} vs {predicted}");
    }

    #[test]
    fn simulate_two_frames_is_one_step() {
        let s = make_initial(0.21, 1111, grid(16), 0.02).unwrap();
        let p = SimParams::default();
        let traj = simulate(&s, &p, 2, 1).unwrap();
        assert_eq!(traj.len(), 2);
        assert_eq!(traj.frames()[0], s);
        assert_eq!(traj.frames()[1], step(&s, &p).unwrap());
    }

    #[test]
    fn frame_times_are_exact() {
        let s = make_initial(0.21, 1111, grid(16), 0.02).unwrap();
        let traj = simulate(&s, &SimParams::default(), 7, 3).unwrap();
        for (j, f) in traj.frames().iter().enumerate() {
            assert_eq!(f.time, j as f64 * 0.15000000000000002);
        }
    }

    #[test]
    fn allen_cahn_mean_is_not_projected() {
        let g = grid(16);
        let s = FieldSet::new(
            ScalarField2D::constant(g.clone(), 0.2),
            ScalarField2D::constant(g.clone(), 0.1),
            ScalarField2D::zeros(g),
            0.0,
        )
        .unwrap();
        let traj = simulate(&s, &no_elastic(), 5, 4).unwrap();
        let last = &traj.frames()[4];
        assert!((last.eta1.mean() - 0.1).abs() > 1e-3);
    }

    #[test]
    fn blowup_is_reported_with_frame() {
        let mut p = no_elastic();
        // explicit bulk term far beyond its stability limit
        p.dt = 50.0;
        p.kappa_eta = 1e-6;
        let s = make_initial(0.2, 3, grid(16), 0.5).unwrap();
        match simulate(&s, &p, 50, 1) {
            Err(Error::Blowup { frame, magnitude }) => {
                assert!(frame >= 1);
                assert!(magnitude.is_infinite() || magnitude > 1e10);
            }
            other => panic!("expected blowup, got {:?}", other.map(|t| t.len())),
        }
    }

    #[test]
    fn polynomial_mobility_conserves_mass() {
        let mut p = SimParams::default();
        p.mobility = Mobility::Polynomial(vec![1.0, 0.5]);
        let s = make_initial(0.22, 9, grid(32), 0.05).unwrap();
        let traj = simulate(&s, &p, 5, 5).unwrap();
        let drift = (traj.frames()[4].c.mean() - s.c.mean()).abs();
        assert!(drift < 1e-12, "drift {drift}");
    }

    #[test]
    fn constant_polynomial_matches_constant_mobility() {
        let mut p = SimParams::default();
        let s = make_initial(0.22, 9, grid(16), 0.05).unwrap();
        let a = step(&s, &p).unwrap();
        p.mobility = Mobility::Polynomial(vec![1.0, 0.0]);
        let b = step(&s, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_mobility_rejected() {
        let mut p = SimParams::default();
        p.mobility = Mobility::Polynomial(vec![0.1, -1.0]);
        assert!(p.validate().is_err());
    }

    #[test]
    fn spatial_forms_parse() {
        assert_eq!("axis".parse::<SpatialForm>().unwrap(), SpatialForm::AxisQuartic);
        assert_eq!("PAPER".parse::<SpatialForm>().unwrap(), SpatialForm::AxisQuartic);
        let alias: SpatialForm = serde_json::from_str("\"paper\"").unwrap();
        assert_eq!(alias, SpatialForm::AxisQuartic);
        assert_eq!("biharmonic".parse::<SpatialForm>().unwrap(), SpatialForm::FullBiharmonic);
        assert!("laplace".parse::<SpatialForm>().is_err());
    }
}
