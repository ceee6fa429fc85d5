//! Second-order central finite differences with periodic wrap-around.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{Axis, ScalarField2D};
use crate::spectral::check_order;

/// Smallest axis length the widest (fourth-derivative) stencil accepts.
pub const MIN_STENCIL_POINTS: usize = 5;

/// Central-difference derivative of order 1, 2 or 4 along `axis`.
pub fn fdm_deriv(f: &ScalarField2D, axis: Axis, order: u32) -> Result<ScalarField2D> {
    check_order(order)?;
    let grid = f.grid();
    let n = grid.points_along(axis);
    if n < MIN_STENCIL_POINTS {
        return Err(Error::invalid(format!(
            "finite-difference stencil needs >= {MIN_STENCIL_POINTS} points along {axis:?}, grid has {n}"
        )));
    }
    let h = grid.spacing(axis);
    let v = f.values();
    let (nx, ny) = grid.shape();
    let at = |i: usize, j: usize, offset: isize| -> f64 {
        let wrap = |p: usize, len: usize| (p as isize + offset).rem_euclid(len as isize) as usize;
        match axis {
            Axis::X => v[[wrap(i, nx), j]],
            Axis::Y => v[[i, wrap(j, ny)]],
        }
    };
    let out = match order {
        1 => {
            let s = 1.0 / (2.0 * h);
            Array2::from_shape_fn((nx, ny), |(i, j)| (at(i, j, 1) - at(i, j, -1)) * s)
        }
        2 => {
            let s = 1.0 / (h * h);
            Array2::from_shape_fn((nx, ny), |(i, j)| {
                (at(i, j, 1) - 2.0 * at(i, j, 0) + at(i, j, -1)) * s
            })
        }
        _ => {
            let s = 1.0 / (h * h * h * h);
            Array2::from_shape_fn((nx, ny), |(i, j)| {
                (at(i, j, 2) - 4.0 * at(i, j, 1) + 6.0 * at(i, j, 0) - 4.0 * at(i, j, -1)
                    + at(i, j, -2))
                    * s
            })
        }
    };
    Ok(ScalarField2D::from_parts(grid.clone(), out))
}
