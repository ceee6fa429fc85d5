//! FFT-based differentiation on the periodic grid.
//!
//! Derivatives are computed as `F⁻¹[(i k)^p F[f]]`. For odd `p` the Nyquist
//! coefficient is dropped: its derivative is not representable as a real
//! grid function. Even orders keep it with the real multiplier `(-1)^{p/2} k^p`.

use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Axis, Grid2D, ScalarField2D};

/// Supported derivative orders.
pub const DERIVATIVE_ORDERS: [u32; 3] = [1, 2, 4];

pub(crate) fn check_order(order: u32) -> Result<()> {
    if DERIVATIVE_ORDERS.contains(&order) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "derivative order must be one of {DERIVATIVE_ORDERS:?}, got {order}"
        )))
    }
}

/// Fourier multiplier of `d^order/dx^order` for wavenumber `k`.
pub fn derivative_multiplier(k: f64, order: u32, is_nyquist: bool) -> Complex64 {
    match order {
        0 => Complex64::new(1.0, 0.0),
        1 if is_nyquist => Complex64::new(0.0, 0.0),
        1 => Complex64::new(0.0, k),
        2 => Complex64::new(-k * k, 0.0),
        3 if is_nyquist => Complex64::new(0.0, 0.0),
        3 => Complex64::new(0.0, -k * k * k),
        4 => Complex64::new(k * k * k * k, 0.0),
        _ => Complex64::new(0.0, k).powu(order),
    }
}

thread_local! {
    // transpose buffer and FFT scratch, reused to avoid large allocations per call
    static WORK: std::cell::RefCell<(Vec<Complex64>, Vec<Complex64>)> = Default::default();
}

/// Planned forward/inverse transforms for one grid.
#[derive(Clone)]
pub struct Spectral {
    grid: Arc<Grid2D>,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    // real-input transforms along x and y, used for single-axis derivatives
    real_x: (Arc<dyn RealToComplex<f64>>, Arc<dyn ComplexToReal<f64>>),
    real_y: (Arc<dyn RealToComplex<f64>>, Arc<dyn ComplexToReal<f64>>),
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Arc<Grid2D>) -> Self {
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(grid.nx());
        let inv_x = planner.plan_fft_inverse(grid.nx());
        let fwd_y = planner.plan_fft_forward(grid.ny());
        let inv_y = planner.plan_fft_inverse(grid.ny());
        let mut real = RealFftPlanner::new();
        let real_x = (real.plan_fft_forward(grid.nx()), real.plan_fft_inverse(grid.nx()));
        let real_y = (real.plan_fft_forward(grid.ny()), real.plan_fft_inverse(grid.ny()));
        Self {
            real_x,
            real_y,
            grid,
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
        }
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, values: &Array2<f64>) -> Array2<Complex64> {
        let mut data = values.mapv(|v| Complex64::new(v, 0.0));
        self.transform(&mut data, false);
        data
    }

    /// Inverse transform (including the `1/(nx·ny)` factor). Returns the real
    /// part and the largest discarded imaginary magnitude.
    pub fn inverse(&self, mut spectrum: Array2<Complex64>) -> (Array2<f64>, f64) {
        self.transform(&mut spectrum, true);
        let scale = 1.0 / self.grid.len() as f64;
        let mut residue = 0.0_f64;
        let real = spectrum.mapv(|z| {
            residue = residue.max((z.im * scale).abs());
            z.re * scale
        });
        (real, residue)
    }

    pub fn inverse_real(&self, spectrum: Array2<Complex64>) -> Array2<f64> {
        self.inverse(spectrum).0
    }

    fn transform(&self, data: &mut Array2<Complex64>, inverse: bool) {
        let (fft_x, fft_y) = if inverse {
            (&self.inv_x, &self.inv_y)
        } else {
            (&self.fwd_x, &self.fwd_y)
        };
        let (nx, ny) = data.dim();
        let scratch_len = fft_x.get_inplace_scratch_len().max(fft_y.get_inplace_scratch_len());
        WORK.with(|cell| {
            let mut work = cell.borrow_mut();
            let zero = Complex64::new(0.0, 0.0);
            work.0.resize(nx * ny, zero);
            work.1.resize(scratch_len, zero);
            let (columns, scratch) = &mut *work;
            let columns = &mut columns[..nx * ny];
            // rows are contiguous along y; rustfft batches over consecutive rows
            let flat = data.as_slice_mut().expect("standard layout");
            fft_y.process_with_scratch(flat, scratch);
            transpose::transpose(flat, columns, ny, nx);
            fft_x.process_with_scratch(columns, scratch);
            transpose::transpose(columns, flat, nx, ny);
        });
    }

    /// Multiplies the spectrum of `f` by `symbol(i, j)` and transforms back.
    pub fn apply_symbol(
        &self,
        f: &ScalarField2D,
        symbol: impl Fn(usize, usize) -> Complex64,
    ) -> (ScalarField2D, f64) {
        let mut spec = self.forward(f.values());
        spec.indexed_iter_mut()
            .for_each(|((i, j), z)| *z *= symbol(i, j));
        let (values, residue) = self.inverse(spec);
        (ScalarField2D::from_parts(self.grid.clone(), values), residue)
    }

    pub(crate) fn check_grid(&self, f: &ScalarField2D) -> Result<()> {
        if Arc::ptr_eq(f.grid(), &self.grid) || **f.grid() == *self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Multiplier for `∂^order/∂axis^order` at spectral index `(i, j)`.
    pub fn axis_multiplier(&self, axis: Axis, order: u32, i: usize, j: usize) -> Complex64 {
        let (k, m, n) = match axis {
            Axis::X => (self.grid.kx()[i], i, self.grid.nx()),
            Axis::Y => (self.grid.ky()[j], j, self.grid.ny()),
        };
        derivative_multiplier(k, order, m == n / 2)
    }

    /// `∂^order f / ∂axis^order`. The multiplier depends on one wavenumber
    /// only, so real 1D transforms along that axis suffice.
    pub fn deriv(&self, f: &ScalarField2D, axis: Axis, order: u32) -> Result<ScalarField2D> {
        check_order(order)?;
        self.check_grid(f)?;
        f.ensure_finite("spectral derivative input")?;
        let (nx, ny) = self.grid.shape();
        let (n, (r2c, c2r)) = match axis {
            Axis::X => (nx, &self.real_x),
            Axis::Y => (ny, &self.real_y),
        };
        let half = n / 2 + 1;
        let mult: Vec<Complex64> = (0..half)
            .map(|m| match axis {
                Axis::X => self.axis_multiplier(axis, order, m, 0),
                Axis::Y => self.axis_multiplier(axis, order, 0, m),
            })
            .collect();
        let src = f.values().as_standard_layout();
        let src = src.as_slice().expect("standard layout");
        let mut lines = match axis {
            Axis::Y => src.to_vec(),
            Axis::X => {
                let mut cols = vec![0.0; nx * ny];
                transpose::transpose(src, &mut cols, ny, nx);
                cols
            }
        };
        let zero = Complex64::new(0.0, 0.0);
        let mut spec = vec![zero; half];
        let mut scratch = vec![zero; r2c.get_scratch_len().max(c2r.get_scratch_len())];
        let scale = 1.0 / n as f64;
        for line in lines.chunks_exact_mut(n) {
            r2c.process_with_scratch(line, &mut spec, &mut scratch)
                .expect("buffer lengths match the plan");
            spec.iter_mut().zip(&mult).for_each(|(z, m)| *z *= m);
            // the inverse of a real signal needs real DC and Nyquist bins
            spec[0].im = 0.0;
            if n % 2 == 0 {
                spec[half - 1].im = 0.0;
            }
            c2r.process_with_scratch(&mut spec, line, &mut scratch)
                .expect("buffer lengths match the plan");
            line.iter_mut().for_each(|v| *v *= scale);
        }
        let values = match axis {
            Axis::Y => lines,
            Axis::X => {
                let mut rows = vec![0.0; nx * ny];
                transpose::transpose(&lines, &mut rows, nx, ny);
                rows
            }
        };
        let values = Array2::from_shape_vec((nx, ny), values).expect("grid shape");
        Ok(ScalarField2D::from_parts(self.grid.clone(), values))
    }

    /// `∂²f/∂x² + ∂²f/∂y²` in one transform pair.
    pub fn laplacian(&self, f: &ScalarField2D) -> ScalarField2D {
        let (kx, ky) = (self.grid.kx(), self.grid.ky());
        self.apply_symbol(f, |i, j| Complex64::new(-(kx[i] * kx[i] + ky[j] * ky[j]), 0.0))
            .0
    }

    /// Energy of `f` measured in wavenumber space, `h_x h_y / N · Σ |f̂|²`.
    pub fn energy(&self, f: &ScalarField2D) -> f64 {
        let spec = self.forward(f.values());
        let n = self.grid.len() as f64;
        spec.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_area() / n
    }
}

/// `∂^order f / ∂axis^order` computed spectrally; `order ∈ {1, 2, 4}`.
pub fn spectral_deriv(f: &ScalarField2D, axis: Axis, order: u32) -> Result<ScalarField2D> {
    check_order(order)?;
    Spectral::new(f.grid().clone()).deriv(f, axis, order)
}
