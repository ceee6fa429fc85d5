//! Trajectories with closed-form residuals, for verifying the residual
//! engine independently of the simulator.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::evolution::{FieldSet, SimParams, Trajectory};
use crate::grid::{Grid2D, ScalarField2D};

/// Temporal factor `g(t)` of a separable field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeProfile {
    /// `1 + t/2 + t²/4`; central and one-sided stencils differentiate it exactly.
    Quadratic,
    /// `e^{−t}`.
    Decay,
}

impl TimeProfile {
    pub fn value(self, t: f64) -> f64 {
        match self {
            TimeProfile::Quadratic => 1.0 + 0.5 * t + 0.25 * t * t,
            TimeProfile::Decay => (-t).exp(),
        }
    }

    pub fn rate(self, t: f64) -> f64 {
        match self {
            TimeProfile::Quadratic => 0.5 + 0.5 * t,
            TimeProfile::Decay => -(-t).exp(),
        }
    }
}

/// Amplitudes of
/// `c = c₀ + a_c sin(kx) g`, `η₁ = a₁ cos(kx) g`, `η₂ = a₂ cos(qy) g`
/// with `k = 2π/lx`, `q = 2π/ly`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Separable {
    pub c0: f64,
    pub amp_c: f64,
    pub amp_eta1: f64,
    pub amp_eta2: f64,
    pub profile: TimeProfile,
}

impl Default for Separable {
    fn default() -> Self {
        Self {
            c0: 0.3,
            amp_c: 0.05,
            amp_eta1: 0.1,
            amp_eta2: 0.1,
            profile: TimeProfile::Quadratic,
        }
    }
}

/// A trajectory together with its exact residuals.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub trajectory: Trajectory,
    pub ch: Array3<f64>,
    pub ac1: Array3<f64>,
    pub ac2: Array3<f64>,
}

impl Separable {
    /// Samples `frames` frames at spacing `dt` starting from `t = 0`.
    ///
    /// The elastic eigenstrains are removed from `params` (the analytic
    /// residual has no elastic term) and the mobility must be constant. The
    /// analytic CH residual is the same for both spatial forms because the
    /// composition varies along x only.
    pub fn build(
        &self,
        grid: Arc<Grid2D>,
        params: &SimParams,
        frames: usize,
        dt: f64,
    ) -> Result<ManufacturedCase> {
        let m = params.mobility.as_constant().ok_or_else(|| {
            Error::invalid("manufactured residuals need a constant mobility")
        })?;
        let mut params = params.clone();
        params.elastic = params.elastic.without_eigenstrain();
        params.validate()?;
        let (k, q) = (2.0 * PI / grid.lx(), 2.0 * PI / grid.ly());
        let b = params.bulk;
        let (l, kc, ke) = (params.kinetic_l, params.kappa_c, params.kappa_eta);
        let (nx, ny) = grid.shape();
        let mut ch = Array3::zeros((frames, nx, ny));
        let mut ac1 = Array3::zeros((frames, nx, ny));
        let mut ac2 = Array3::zeros((frames, nx, ny));
        let mut states = Vec::with_capacity(frames);
        for t_idx in 0..frames {
            let t = t_idx as f64 * dt;
            let (g, gt) = (self.profile.value(t), self.profile.rate(t));
            let field = |f: &dyn Fn(f64, f64) -> f64| ScalarField2D::from_fn(grid.clone(), f);
            states.push(FieldSet::new(
                field(&|x, _| self.c0 + self.amp_c * (k * x).sin() * g),
                field(&|x, _| self.amp_eta1 * (k * x).cos() * g),
                field(&|_, y| self.amp_eta2 * (q * y).cos() * g),
                t,
            )?);
            for i in 0..nx {
                for j in 0..ny {
                    let (x, y) = (grid.x(i), grid.y(j));
                    let (s, cx, cy) = ((k * x).sin(), (k * x).cos(), (q * y).cos());
                    let c = self.c0 + self.amp_c * s * g;
                    let (e1, e2) = (self.amp_eta1 * cx * g, self.amp_eta2 * cy * g);
                    // ∇²(∂f/∂c), using ∇²cos²(kx) = −2k²cos(2kx)
                    let lap_fc = -2.0 * b.a1 * k * k * self.amp_c * s * g
                        + 2.0
                            * b.a2
                            * g
                            * g
                            * (self.amp_eta1.powi(2) * k * k * (2.0 * k * x).cos()
                                + self.amp_eta2.powi(2) * q * q * (2.0 * q * y).cos());
                    let fourth = k.powi(4) * self.amp_c * s * g;
                    ch[[t_idx, i, j]] = self.amp_c * s * gt - m * lap_fc + 2.0 * kc * m * fourth;
                    let lap1 = -k * k * e1;
                    let lap2 = -q * q * e2;
                    ac1[[t_idx, i, j]] = self.amp_eta1 * cx * gt
                        + l * (b.d_deta(c, e1, e2) - 2.0 * ke * lap1);
                    ac2[[t_idx, i, j]] = self.amp_eta2 * cy * gt
                        + l * (b.d_deta(c, e2, e1) - 2.0 * ke * lap2);
                }
            }
        }
        Ok(ManufacturedCase {
            trajectory: Trajectory::new(states, dt, params)?,
            ch,
            ac1,
            ac2,
        })
    }
}

/// One Fourier mode `amp · sin(2π(mx·x/lx + my·y/ly))` of a composition field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub mx: i32,
    pub my: i32,
    pub amp: f64,
}

/// Decay rate of `mode` under the composition equation linearized at `η = 0`:
/// `λ = −M(2A₁|k|² + 2κ_c K₄(k))`.
pub fn linear_ch_rate(grid: &Grid2D, params: &SimParams, mode: Mode) -> Result<f64> {
    let m = params
        .mobility
        .as_constant()
        .ok_or_else(|| Error::invalid("linear solution needs a constant mobility"))?;
    let kx = 2.0 * PI * mode.mx as f64 / grid.lx();
    let ky = 2.0 * PI * mode.my as f64 / grid.ly();
    let k4 = params.ch_spatial_form.fourth_order_symbol(kx, ky);
    Ok(-m * (2.0 * params.bulk.a1 * (kx * kx + ky * ky) + 2.0 * params.kappa_c * k4))
}

/// Exact solution `c = c₀ + Σ amp·sin(k·x)·e^{λt}`, `η₁ = η₂ = 0` of the full
/// nonlinear system (with `η = 0` the bulk term is linear in `c` and the
/// Allen-Cahn equations are satisfied trivially).
pub fn linear_ch_solution(
    grid: Arc<Grid2D>,
    params: &SimParams,
    c0: f64,
    modes: &[Mode],
    frames: usize,
    dt: f64,
) -> Result<Trajectory> {
    let rates = modes
        .iter()
        .map(|&m| linear_ch_rate(&grid, params, m))
        .collect::<Result<Vec<_>>>()?;
    let (lx, ly) = (grid.lx(), grid.ly());
    let zero = ScalarField2D::zeros(grid.clone());
    let states = (0..frames)
        .map(|j| {
            let t = j as f64 * dt;
            let c = ScalarField2D::from_fn(grid.clone(), |x, y| {
                modes.iter().zip(&rates).fold(c0, |acc, (m, lambda)| {
                    let phase = 2.0 * PI * (m.mx as f64 * x / lx + m.my as f64 * y / ly);
                    acc + m.amp * phase.sin() * (lambda * t).exp()
                })
            });
            FieldSet::new(c, zero.clone(), zero.clone(), t)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut params = params.clone();
    params.dt = dt;
    Trajectory::new(states, dt, params)
}

/// Modes spread from the longest wavelength up to a quarter of the Nyquist
/// frequency; FDM truncation grows with `k⁴` across them.
pub fn rough_modes(grid: &Grid2D) -> Vec<Mode> {
    let n = grid.nx().min(grid.ny()) as i32;
    vec![
        Mode { mx: 1, my: 0, amp: 0.02 },
        Mode { mx: 2, my: 3, amp: 0.01 },
        Mode { mx: n / 8, my: n / 16, amp: 0.005 },
        Mode { mx: n / 4, my: 1, amp: 0.002 },
    ]
}

/// The linear CH solution used for backend comparison: [`rough_modes`] around
/// `c₀ = 0.3`, with the frame spacing chosen so the fastest mode changes by
/// about 0.1 % per frame.
pub fn backend_gap_case(grid: Arc<Grid2D>, params: &SimParams, frames: usize) -> Result<Trajectory> {
    let modes = rough_modes(&grid);
    let fastest = modes
        .iter()
        .map(|&m| linear_ch_rate(&grid, params, m).map(f64::abs))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let dt = 1e-3 / fastest.max(1e-12);
    let mut params = params.clone();
    params.elastic = params.elastic.without_eigenstrain();
    linear_ch_solution(grid, &params, 0.3, &modes, frames, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::DerivBackend;
    use crate::evolution::SpatialForm;
    use crate::residuals::{ac_residual, ch_residual};
    use crate::energetics::Variant;

    fn max_diff(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
        a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn quadratic_profile_is_differentiated_exactly() {
        let grid = Arc::new(Grid2D::unit_square(32).unwrap());
        let case = Separable::default()
            .build(grid, &SimParams::default(), 5, 0.1)
            .unwrap();
        let b = DerivBackend::pseudo_spectral();
        let ch = ch_residual(&case.trajectory, &b, SpatialForm::FullBiharmonic).unwrap();
        assert!(max_diff(&ch.values, &case.ch) < 1e-10);
        let ac = ac_residual(&case.trajectory, Variant::Two, &b).unwrap();
        assert!(max_diff(&ac.values, &case.ac2) < 1e-10);
    }

    #[test]
    fn linear_solution_rate_matches_time_derivative() {
        let grid = Arc::new(Grid2D::unit_square(32).unwrap());
        let p = SimParams::default();
        let t = backend_gap_case(grid, &p, 5).unwrap();
        let r = ch_residual(&t, &DerivBackend::pseudo_spectral(), p.ch_spatial_form).unwrap();
        assert!(r.normalized_loss() < 1e-10, "{}", r.normalized_loss());
    }

    #[test]
    fn variable_mobility_is_rejected() {
        let grid = Arc::new(Grid2D::unit_square(8).unwrap());
        let mut p = SimParams::default();
        p.mobility = crate::evolution::Mobility::Polynomial(vec![1.0, 0.5]);
        assert!(Separable::default().build(grid, &p, 3, 0.1).is_err());
    }
}
