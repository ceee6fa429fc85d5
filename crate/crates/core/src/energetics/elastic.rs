//! Homogeneous-modulus microelasticity in Fourier space.
//!
//! For plane (2D) cubic elasticity with per-variant eigenstrains `ε⁽ᵖ⁾`, the
//! strain energy of the coherent two-variant mixture is a quadratic form in
//! `θ_p = η_p²` with the direction-dependent kernel
//!
//! ```text
//! B_pi(n) = C_stuv ε⁽ᵖ⁾_st ε⁽ⁱ⁾_uv − n_t σ⁽ᵖ⁾_ts Ω_su(n) σ⁽ⁱ⁾_uv n_v
//! σ⁽ⁱ⁾_st = C_stuv ε⁽ⁱ⁾_uv,        Ω⁻¹_su(n) = C_stuv n_t n_v
//! ```
//!
//! and the driving force on `η_i` is `2 η_i F⁻¹[Σ_p B_pi(k/|k|) θ̂_p(k)]`.
//! The `k = 0` (homogeneous strain) mode is excluded.

use std::sync::Arc;

use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energetics::bulk::Variant;
use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField2D};
use crate::spectral::Spectral;

/// Symmetric rank-2 tensor in the plane.
pub type Tensor2 = [[f64; 2]; 2];
/// Rank-4 tensor in the plane, indexed `[s][t][u][v]`.
pub type Tensor4 = [[[[f64; 2]; 2]; 2]; 2];

const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElasticModel {
    pub c11: f64,
    pub c12: f64,
    pub c44: f64,
    pub eigenstrain_1: Tensor2,
    pub eigenstrain_2: Tensor2,
}

impl Default for ElasticModel {
    /// Cubic matrix with two tetragonal variants `diag(δ₁, δ₂)` and
    /// `diag(δ₂, δ₁)`, `δ₁ = 0.05`, `δ₂ = −0.01`.
    fn default() -> Self {
        Self::tetragonal(2.0, 1.0, 0.5, 0.05, -0.01)
    }
}

impl ElasticModel {
    pub fn tetragonal(c11: f64, c12: f64, c44: f64, d1: f64, d2: f64) -> Self {
        Self {
            c11,
            c12,
            c44,
            eigenstrain_1: [[d1, 0.0], [0.0, d2]],
            eigenstrain_2: [[d2, 0.0], [0.0, d1]],
        }
    }

    /// Same stiffness, no transformation strain.
    pub fn without_eigenstrain(&self) -> Self {
        Self {
            eigenstrain_1: [[0.0; 2]; 2],
            eigenstrain_2: [[0.0; 2]; 2],
            ..*self
        }
    }

    /// The model with the two variants' eigenstrains exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            eigenstrain_1: self.eigenstrain_2,
            eigenstrain_2: self.eigenstrain_1,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let strains = self.eigenstrain_1.iter().chain(&self.eigenstrain_2).flatten();
        if [self.c11, self.c12, self.c44]
            .iter()
            .chain(strains)
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("elastic constants must be finite"));
        }
        if !(self.c44 > 0.0 && self.c11 > self.c12.abs()) {
            return Err(Error::invalid(format!(
                "stiffness is not positive definite (c11 = {}, c12 = {}, c44 = {})",
                self.c11, self.c12, self.c44
            )));
        }
        for (name, e) in [("1", &self.eigenstrain_1), ("2", &self.eigenstrain_2)] {
            if e[0][1] != e[1][0] {
                return Err(Error::invalid(format!("eigenstrain {name} is not symmetric")));
            }
        }
        Ok(())
    }

    pub fn eigenstrain(&self, v: Variant) -> &Tensor2 {
        match v {
            Variant::One => &self.eigenstrain_1,
            Variant::Two => &self.eigenstrain_2,
        }
    }

    pub fn has_eigenstrain(&self) -> bool {
        self.eigenstrain_1
            .iter()
            .chain(&self.eigenstrain_2)
            .flatten()
            .any(|&v| v != 0.0)
    }

    /// Full `C_stuv` of the cubic crystal restricted to the plane.
    pub fn stiffness_tensor(&self) -> Tensor4 {
        let mut c = [[[[0.0; 2]; 2]; 2]; 2];
        for s in 0..2 {
            for t in 0..2 {
                for u in 0..2 {
                    for v in 0..2 {
                        c[s][t][u][v] = if s == t && u == v {
                            if s == u {
                                self.c11
                            } else {
                                self.c12
                            }
                        } else if s != t && u != v {
                            self.c44
                        } else {
                            0.0
                        };
                    }
                }
            }
        }
        c
    }

    /// `σ = C : ε` for a symmetric strain.
    pub fn stress(&self, e: &Tensor2) -> Tensor2 {
        let xx = self.c11 * e[0][0] + self.c12 * e[1][1];
        let yy = self.c12 * e[0][0] + self.c11 * e[1][1];
        let xy = 2.0 * self.c44 * e[0][1];
        [[xx, xy], [xy, yy]]
    }

    /// Acoustic tensor `C_stuv n_t n_v`.
    pub fn acoustic(&self, n: [f64; 2]) -> Tensor2 {
        let off = (self.c12 + self.c44) * n[0] * n[1];
        [
            [self.c11 * n[0] * n[0] + self.c44 * n[1] * n[1], off],
            [off, self.c11 * n[1] * n[1] + self.c44 * n[0] * n[0]],
        ]
    }
}

fn double_dot(a: &Tensor2, b: &Tensor2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

fn mat_vec(a: &Tensor2, n: [f64; 2]) -> [f64; 2] {
    [
        a[0][0] * n[0] + a[0][1] * n[1],
        a[1][0] * n[0] + a[1][1] * n[1],
    ]
}

/// `B_pi(n)` for a unit direction `n`; `[p][i]` with `p, i` the variant indices.
pub fn elastic_kernel(n: [f64; 2], model: &ElasticModel) -> Result<Tensor2> {
    let norm = n[0].hypot(n[1]);
    if !((norm - 1.0).abs() < UNIT_TOL) {
        return Err(Error::invalid(format!(
            "kernel direction must be a unit vector, |n| = {norm}"
        )));
    }
    let g = model.acoustic(n);
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let scale = (g[0][0] + g[1][1]).powi(2);
    if !(det > 1e-14 * scale) || !det.is_finite() {
        return Err(Error::SingularAcousticTensor { n });
    }
    let omega = [
        [g[1][1] / det, -g[0][1] / det],
        [-g[1][0] / det, g[0][0] / det],
    ];
    let strains = [&model.eigenstrain_1, &model.eigenstrain_2];
    let stresses = strains.map(|e| model.stress(e));
    let traction = stresses.map(|s| mat_vec(&s, n));
    let mut b = [[0.0; 2]; 2];
    for p in 0..2 {
        for i in 0..2 {
            let relaxed = mat_vec(&omega, traction[i]);
            b[p][i] = double_dot(strains[p], &stresses[i])
                - (traction[p][0] * relaxed[0] + traction[p][1] * relaxed[1]);
        }
    }
    Ok(b)
}

/// `B_pi` tabulated at every wavevector of a grid (zero at `k = 0`).
#[derive(Debug, Clone)]
pub struct ElasticKernel {
    grid: Arc<Grid2D>,
    table: Array2<Tensor2>,
    active: bool,
}

impl ElasticKernel {
    pub fn new(grid: Arc<Grid2D>, model: &ElasticModel) -> Result<Self> {
        let active = model.has_eigenstrain();
        let mut table = Array2::from_elem(grid.shape(), [[0.0; 2]; 2]);
        if active {
            let (kx, ky) = (grid.kx(), grid.ky());
            for ((i, j), b) in table.indexed_iter_mut() {
                let k = kx[i].hypot(ky[j]);
                if k > 0.0 {
                    *b = elastic_kernel([kx[i] / k, ky[j] / k], model)?;
                }
            }
        }
        Ok(Self {
            grid,
            table,
            active,
        })
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    /// `B_pi` at spectral index `(i, j)`.
    pub fn at(&self, i: usize, j: usize) -> &Tensor2 {
        &self.table[[i, j]]
    }

    /// False when every eigenstrain vanishes (the kernel is identically zero).
    pub fn is_active(&self) -> bool {
        self.active
    }

    /// `F⁻¹[Σ_p B_pi θ̂_p]` for both `i`, plus the largest discarded imaginary part.
    fn convolve(&self, spectral: &Spectral, theta_hat: &[Array2<Complex64>; 2]) -> ([Array2<f64>; 2], f64) {
        let mut residue = 0.0_f64;
        let out = [0, 1].map(|i| {
            let mut acc = Array2::<Complex64>::zeros(self.grid.shape());
            Zip::from(&mut acc)
                .and(&self.table)
                .and(&theta_hat[0])
                .and(&theta_hat[1])
                .for_each(|a, b, t0, t1| *a = t0 * b[0][i] + t1 * b[1][i]);
            let (real, r) = spectral.inverse(acc);
            residue = residue.max(r);
            real
        });
        (out, residue)
    }

    fn theta_hat(spectral: &Spectral, eta1: &ScalarField2D, eta2: &ScalarField2D) -> [Array2<Complex64>; 2] {
        [eta1, eta2].map(|e| spectral.forward(&e.values().mapv(|v| v * v)))
    }

    /// Driving forces `δF_el/δη₁`, `δF_el/δη₂` and the imaginary residue
    /// discarded by the inverse transforms.
    pub fn driving_force_with_residue(
        &self,
        spectral: &Spectral,
        eta1: &ScalarField2D,
        eta2: &ScalarField2D,
    ) -> Result<(ScalarField2D, ScalarField2D, f64)> {
        spectral.check_grid(eta1)?;
        eta1.check_same_grid(&[eta2])?;
        if !self.active {
            let zero = ScalarField2D::zeros(self.grid.clone());
            return Ok((zero.clone(), zero, 0.0));
        }
        let theta_hat = Self::theta_hat(spectral, eta1, eta2);
        let ([g1, g2], residue) = self.convolve(spectral, &theta_hat);
        let force = |eta: &ScalarField2D, g: Array2<f64>| {
            let mut v = g;
            Zip::from(&mut v)
                .and(eta.values())
                .for_each(|g, &e| *g *= 2.0 * e);
            ScalarField2D::from_parts(self.grid.clone(), v)
        };
        Ok((force(eta1, g1), force(eta2, g2), residue))
    }

    pub fn driving_force(
        &self,
        spectral: &Spectral,
        eta1: &ScalarField2D,
        eta2: &ScalarField2D,
    ) -> Result<(ScalarField2D, ScalarField2D)> {
        self.driving_force_with_residue(spectral, eta1, eta2)
            .map(|(a, b, _)| (a, b))
    }

    /// Elastic energy `h_x h_y / (2N) Σ_k Σ_pi B_pi θ̂_p conj(θ̂_i)`, returned
    /// with the imaginary part of the sum (zero up to rounding).
    pub fn energy(
        &self,
        spectral: &Spectral,
        eta1: &ScalarField2D,
        eta2: &ScalarField2D,
    ) -> Result<(f64, f64)> {
        spectral.check_grid(eta1)?;
        eta1.check_same_grid(&[eta2])?;
        if !self.active {
            return Ok((0.0, 0.0));
        }
        let th = Self::theta_hat(spectral, eta1, eta2);
        let mut sum = Complex64::new(0.0, 0.0);
        Zip::from(&self.table)
            .and(&th[0])
            .and(&th[1])
            .for_each(|b, t0, t1| {
                let t = [t0, t1];
                for p in 0..2 {
                    for i in 0..2 {
                        sum += t[p] * t[i].conj() * b[p][i];
                    }
                }
            });
        let scale = self.grid.cell_area() / (2.0 * self.grid.len() as f64);
        Ok((sum.re * scale, sum.im * scale))
    }
}

/// Elastic driving forces on `η₁` and `η₂`.
pub fn elastic_driving_force(
    eta1: &ScalarField2D,
    eta2: &ScalarField2D,
    model: &ElasticModel,
) -> Result<(ScalarField2D, ScalarField2D)> {
    eta1.check_same_grid(&[eta2])?;
    let grid = eta1.grid().clone();
    let kernel = ElasticKernel::new(grid.clone(), model)?;
    kernel.driving_force(&Spectral::new(grid), eta1, eta2)
}
