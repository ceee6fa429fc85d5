//! Landau-type bulk free energy of the composition / two-variant system:
//!
//! ```text
//! f(c, η₁, η₂) = A₁c² + A₂(1−c)(η₁² + η₂²) + A₄₁(η₁⁴ + η₂⁴) + A₄₂ η₁²η₂² + A₆₁(η₁⁶ + η₂⁶)
//! ```

use ndarray::Zip;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField2D;

/// Which orientation variant (order parameter) a quantity refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    One,
    Two,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::One, Variant::Two];

    pub fn index(self) -> usize {
        match self {
            Variant::One => 0,
            Variant::Two => 1,
        }
    }

    pub fn other(self) -> Variant {
        match self {
            Variant::One => Variant::Two,
            Variant::Two => Variant::One,
        }
    }
}

impl TryFrom<usize> for Variant {
    type Error = Error;

    /// One-based, as in `η₁`, `η₂`.
    fn try_from(i: usize) -> Result<Self> {
        match i {
            1 => Ok(Variant::One),
            2 => Ok(Variant::Two),
            _ => Err(Error::invalid(format!("variant index must be 1 or 2, got {i}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BulkCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub a41: f64,
    pub a42: f64,
    pub a61: f64,
}

impl Default for BulkCoeffs {
    fn default() -> Self {
        Self {
            a1: 1.0,
            a2: 1.0,
            a41: 0.5,
            a42: 0.5,
            a61: 0.5,
        }
    }
}

impl BulkCoeffs {
    pub fn validate(&self) -> Result<()> {
        let all = [self.a1, self.a2, self.a41, self.a42, self.a61];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("bulk coefficients must be finite"));
        }
        if self.a41 <= 0.0 || self.a61 < 0.0 {
            return Err(Error::invalid(format!(
                "need a41 > 0 and a61 >= 0 for a bounded free energy (a41 = {}, a61 = {})",
                self.a41, self.a61
            )));
        }
        Ok(())
    }

    pub fn density(&self, c: f64, e1: f64, e2: f64) -> f64 {
        let (s1, s2) = (e1 * e1, e2 * e2);
        self.a1 * c * c
            + self.a2 * (1.0 - c) * (s1 + s2)
            + self.a41 * (s1 * s1 + s2 * s2)
            + self.a42 * (s1 * s2)
            + self.a61 * (s1 * s1 * s1 + s2 * s2 * s2)
    }

    /// `∂f/∂c = 2A₁c − A₂(η₁² + η₂²)`.
    pub fn d_dc(&self, c: f64, e1: f64, e2: f64) -> f64 {
        2.0 * self.a1 * c - self.a2 * (e1 * e1 + e2 * e2)
    }

    /// `∂f/∂η` for the variant whose value is `ei`, with `ej` the other one:
    /// `2A₂(1−c)ηᵢ + 4A₄₁ηᵢ³ + 2A₄₂ηᵢηⱼ² + 6A₆₁ηᵢ⁵`.
    pub fn d_deta(&self, c: f64, ei: f64, ej: f64) -> f64 {
        let si = ei * ei;
        2.0 * self.a2 * (1.0 - c) * ei
            + 4.0 * self.a41 * si * ei
            + 2.0 * self.a42 * ei * ej * ej
            + 6.0 * self.a61 * si * si * ei
    }
}

fn pointwise(
    c: &ScalarField2D,
    eta1: &ScalarField2D,
    eta2: &ScalarField2D,
    f: impl Fn(f64, f64, f64) -> f64,
) -> Result<ScalarField2D> {
    c.check_same_grid(&[eta1, eta2])?;
    let values = Zip::from(c.values())
        .and(eta1.values())
        .and(eta2.values())
        .map_collect(|&c, &e1, &e2| f(c, e1, e2));
    Ok(ScalarField2D::from_parts(c.grid().clone(), values))
}

/// Bulk free-energy density at every grid point.
pub fn bulk_f(
    c: &ScalarField2D,
    eta1: &ScalarField2D,
    eta2: &ScalarField2D,
    coeffs: &BulkCoeffs,
) -> Result<ScalarField2D> {
    pointwise(c, eta1, eta2, |c, e1, e2| coeffs.density(c, e1, e2))
}

pub fn df_dc(
    c: &ScalarField2D,
    eta1: &ScalarField2D,
    eta2: &ScalarField2D,
    coeffs: &BulkCoeffs,
) -> Result<ScalarField2D> {
    pointwise(c, eta1, eta2, |c, e1, e2| coeffs.d_dc(c, e1, e2))
}

pub fn df_deta(
    c: &ScalarField2D,
    eta1: &ScalarField2D,
    eta2: &ScalarField2D,
    coeffs: &BulkCoeffs,
    variant: Variant,
) -> Result<ScalarField2D> {
    match variant {
        Variant::One => pointwise(c, eta1, eta2, |c, e1, e2| coeffs.d_deta(c, e1, e2)),
        Variant::Two => pointwise(c, eta1, eta2, |c, e1, e2| coeffs.d_deta(c, e2, e1)),
    }
}
