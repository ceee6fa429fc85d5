//! Periodic grid geometry and real scalar fields sampled on it.
//!
//! Points sit at `x_i = i * h_x`, `i = 0..nx`, with `h_x = lx / nx`; the point
//! at `x = lx` is the periodic image of `x = 0` and is not stored.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial direction of a derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

/// Angular wavenumbers of an `n`-point periodic grid of length `length`, in
/// the usual FFT order `2π/L · {0, 1, …, n/2-1, -n/2, …, -1}`.
pub fn wave_vectors(n: usize, length: f64) -> Result<Vec<f64>> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "point count must be even and >= 4, got {n}"
        )));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::invalid(format!(
            "domain length must be positive and finite, got {length}"
        )));
    }
    let scale = 2.0 * PI / length;
    let half = n / 2;
    Ok((0..n)
        .map(|m| {
            let freq = if m < half {
                m as f64
            } else {
                m as f64 - n as f64
            };
            scale * freq
        })
        .collect())
}

/// Geometry of the doubly periodic simulation box.
#[derive(Clone, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    kx: Vec<f64>,
    ky: Vec<f64>,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        let kx = wave_vectors(nx, lx)?;
        let ky = wave_vectors(ny, ly)?;
        Ok(Self {
            nx,
            ny,
            lx,
            ly,
            kx,
            ky,
        })
    }

    /// `n × n` points at unit spacing, e.g. `x ∈ [0, 128)` for `n = 128`.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, n as f64, n as f64)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn kx(&self) -> &[f64] {
        &self.kx
    }

    pub fn ky(&self) -> &[f64] {
        &self.ky
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy()
    }

    pub(crate) fn points_along(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Y => self.ny,
        }
    }

    pub(crate) fn spacing(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.hx(),
            Axis::Y => self.hy(),
        }
    }
}

impl fmt::Debug for Grid2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid2D")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("lx", &self.lx)
            .field("ly", &self.ly)
            .finish()
    }
}

/// Serializable description of a grid (wavenumbers are always recomputed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 128,
            ny: 128,
            lx: 128.0,
            ly: 128.0,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<Grid2D>> {
        Grid2D::new(self.nx, self.ny, self.lx, self.ly).map(Arc::new)
    }
}

impl From<&Grid2D> for GridSpec {
    fn from(g: &Grid2D) -> Self {
        Self {
            nx: g.nx,
            ny: g.ny,
            lx: g.lx,
            ly: g.ly,
        }
    }
}

/// A real field of shape `(nx, ny)`; index `[i, j]` is the value at `(x_i, y_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    grid: Arc<Grid2D>,
    values: Array2<f64>,
}

impl ScalarField2D {
    pub fn new(grid: Arc<Grid2D>, values: Array2<f64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::invalid(format!(
                "field shape {:?} does not match grid {:?}",
                values.dim(),
                grid.shape()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid2D>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Arc<Grid2D>, value: f64) -> Self {
        let values = Array2::from_elem(grid.shape(), value);
        Self { grid, values }
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn from_fn(grid: Arc<Grid2D>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn(grid.shape(), |(i, j)| f(grid.x(i), grid.y(j)));
        Self { grid, values }
    }

    pub(crate) fn from_parts(grid: Arc<Grid2D>, values: Array2<f64>) -> Self {
        debug_assert_eq!(values.dim(), grid.shape());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn same_grid(&self, other: &ScalarField2D) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub(crate) fn check_same_grid(&self, others: &[&ScalarField2D]) -> Result<()> {
        if others.iter().all(|o| self.same_grid(o)) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
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

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Arithmetic mean, summed in storage order.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `∫ v dx dy` by the periodic rectangle rule.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.mapv(f),
        }
    }

    /// Periodic shift by whole cells: `out[i, j] = self[i - di, j - dj]`.
    pub fn roll(&self, di: isize, dj: isize) -> Self {
        let (nx, ny) = self.grid.shape();
        let values = Array2::from_shape_fn((nx, ny), |(i, j)| {
            let si = (i as isize - di).rem_euclid(nx as isize) as usize;
            let sj = (j as isize - dj).rem_euclid(ny as isize) as usize;
            self.values[[si, sj]]
        });
        Self {
            grid: self.grid.clone(),
            values,
        }
    }
}
