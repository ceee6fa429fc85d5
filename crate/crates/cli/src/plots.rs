//! Grayscale PNG rendering of 2D fields.

use std::path::Path;

use image::{GrayImage, Luma};
use ndarray::ArrayView2;

use crate::error::{CliError, Result};

/// Maps `[min, max]` of `values` to black..white. The image's x axis is the
/// first array index and y points up. A constant field renders mid-gray.
pub fn render(values: ArrayView2<f64>) -> GrayImage {
    let (nx, ny) = values.dim();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    let span = hi - lo;
    GrayImage::from_fn(nx as u32, ny as u32, |x, y| {
        let v = values[[x as usize, ny - 1 - y as usize]];
        let level = if span > 0.0 { (v - lo) / span } else { 0.5 };
        Luma([(level * 255.0).round() as u8])
    })
}

pub fn save(values: ArrayView2<f64>, path: &Path) -> Result<()> {
    render(values).save(path).map_err(|source| CliError::Image {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn extremes_map_to_black_and_white() {
        let a = Array2::from_shape_fn((4, 3), |(i, j)| (i * 3 + j) as f64);
        let img = render(a.view());
        assert_eq!(img.dimensions(), (4, 3));
        // (0, 0) sits at the bottom-left pixel
        assert_eq!(img.get_pixel(0, 2)[0], 0);
        assert_eq!(img.get_pixel(3, 0)[0], 255);
    }

    #[test]
    fn constant_field_is_mid_gray() {
        let img = render(Array2::from_elem((2, 2), 0.7).view());
        assert!(img.pixels().all(|p| p[0] == 128));
    }

    #[test]
    fn saved_file_is_png() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.png");
        save(Array2::from_shape_fn((5, 5), |(i, _)| i as f64).view(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
    }
}
