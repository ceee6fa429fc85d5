use std::sync::Arc;

use crate::energetics::elastic::ElasticKernel;
use crate::error::{Error, Result};
use crate::evolution::{FieldSet, SimParams};
use crate::grid::{Grid2D, ScalarField2D};
use crate::spectral::Spectral;

/// Components of the total free energy
/// `∫ [f + κ_c|∇c|² + κ_η Σᵢ|∇ηᵢ|²] dA + F_el`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub bulk: f64,
    pub gradient: f64,
    pub elastic: f64,
    /// Imaginary part left in the Fourier-space elastic sum.
    pub elastic_imag: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.bulk + self.gradient + self.elastic
    }
}

/// Reusable energy functional for one grid and parameter set.
#[derive(Debug, Clone)]
pub struct EnergyEvaluator {
    spectral: Spectral,
    kernel: ElasticKernel,
    params: SimParams,
}

impl EnergyEvaluator {
    pub fn new(grid: Arc<Grid2D>, params: &SimParams) -> Result<Self> {
        Ok(Self {
            spectral: Spectral::new(grid.clone()),
            kernel: ElasticKernel::new(grid, &params.elastic)?,
            params: params.clone(),
        })
    }

    /// `∫ |∇u|² dA` evaluated exactly for the trigonometric interpolant.
    fn dirichlet(&self, u: &ScalarField2D) -> f64 {
        let grid = self.spectral.grid();
        let (kx, ky) = (grid.kx(), grid.ky());
        let spec = self.spectral.forward(u.values());
        let sum: f64 = spec
            .indexed_iter()
            .map(|((i, j), z)| (kx[i] * kx[i] + ky[j] * ky[j]) * z.norm_sqr())
            .sum();
        sum * grid.cell_area() / grid.len() as f64
    }

    pub fn evaluate(&self, fields: &FieldSet) -> Result<EnergyBreakdown> {
        self.spectral.check_grid(&fields.c)?;
        let bulk_density = crate::energetics::bulk_f(
            &fields.c,
            &fields.eta1,
            &fields.eta2,
            &self.params.bulk,
        )?;
        let bulk = bulk_density.integral();
        let gradient = self.params.kappa_c * self.dirichlet(&fields.c)
            + self.params.kappa_eta * (self.dirichlet(&fields.eta1) + self.dirichlet(&fields.eta2));
        let (elastic, elastic_imag) = self.kernel.energy(&self.spectral, &fields.eta1, &fields.eta2)?;
        if elastic_imag.abs() > 1e-10 * elastic.abs().max(f64::MIN_POSITIVE) && elastic_imag.abs() > 1e-300 {
            return Err(Error::NonFinite {
                context: format!("elastic energy has imaginary part {elastic_imag:e}"),
            });
        }
        Ok(EnergyBreakdown {
            bulk,
            gradient,
            elastic,
            elastic_imag,
        })
    }
}

/// Total free energy of one state.
pub fn total_energy(fields: &FieldSet, params: &SimParams) -> Result<f64> {
    EnergyEvaluator::new(fields.grid().clone(), params)?
        .evaluate(fields)
        .map(|e| e.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::FieldSet;

    fn uniform_state(n: usize, c0: f64) -> FieldSet {
        let g = Arc::new(Grid2D::unit_square(n).unwrap());
        FieldSet::new(
            ScalarField2D::constant(g.clone(), c0),
            ScalarField2D::zeros(g.clone()),
            ScalarField2D::zeros(g),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn uniform_state_energy_is_area_times_density() {
        let mut params = SimParams::default();
        params.elastic = params.elastic.without_eigenstrain();
        let state = uniform_state(16, 0.2);
        let e = total_energy(&state, &params).unwrap();
        let expect = 16.0 * 16.0 * params.bulk.a1 * 0.2 * 0.2;
        assert!((e - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn shifting_c_changes_only_bulk() {
        let params = SimParams::default();
        let g = Arc::new(Grid2D::unit_square(16).unwrap());
        let wave = |x: f64, y: f64| 0.3 + 0.05 * (0.4 * x).sin() * (0.8 * y).cos();
        let eta = |_x: f64, y: f64| 0.2 * (0.4 * y).cos();
        let a = FieldSet::new(
            ScalarField2D::from_fn(g.clone(), wave),
            ScalarField2D::from_fn(g.clone(), eta),
            ScalarField2D::from_fn(g.clone(), |x, y| eta(y, x)),
            0.0,
        )
        .unwrap();
        let mut b = a.clone();
        b.c = a.c.map(|v| v + 0.1);
        let ev = EnergyEvaluator::new(g, &params).unwrap();
        let (ea, eb) = (ev.evaluate(&a).unwrap(), ev.evaluate(&b).unwrap());
        assert!((ea.gradient - eb.gradient).abs() < 1e-12 * ea.gradient.abs());
        assert_eq!(ea.elastic, eb.elastic);
        assert!(ea.bulk != eb.bulk);
        assert!(ea.elastic_imag.abs() <= 1e-10 * ea.elastic.abs());
    }
}
