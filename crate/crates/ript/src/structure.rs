//! Structure-tensor edge analysis and the local-structure weight map.
//!
//! The frame is pre-smoothed at the noise scale `sigma`, gradients are taken
//! by central differences, the gradient outer products are smoothed at the
//! integration scale `alpha`, and the per-pixel eigenvalue difference of the
//! resulting 2x2 field scores how edge-like each pixel is. Flat areas and
//! compact blobs score near zero; extended edges score high. The weight map
//! `w = exp(h * normalized_score)` therefore penalizes edges by up to
//! `exp(h)` while leaving likely targets close to weight 1.

use crate::error::{Error, Result};
use crate::image_io::Image;

/// Smoothed gradient-product field: per-pixel 2x2 symmetric matrix
/// `[[j11, j12], [j12, j22]]`. `j11` carries the horizontal (column-wise)
/// gradient energy, `j22` the vertical one.
#[derive(Debug, Clone)]
pub struct StructureField {
    pub j11: Image,
    pub j12: Image,
    pub j22: Image,
}

/// Symmetric (reflecting, edge duplicated) boundary index.
fn reflect(idx: isize, len: usize) -> usize {
    let n = len as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * n;
    let mut m = idx % period;
    if m < 0 {
        m += period;
    }
    if m < n {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Separable Gaussian blur, kernel truncated at `ceil(3*sigma)` and
/// normalized, with symmetric boundary handling. `sigma = 0` is the identity.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "blur sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let radius = (3.0 * sigma).ceil() as usize;
    let mut kernel: Vec<f64> = (-(radius as isize)..=radius as isize)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);

    let (rows, cols) = img.dim();
    let r = radius as isize;
    // Horizontal pass.
    let mut tmp = Image::zeros((rows, cols));
    for row in 0..rows {
        for col in 0..cols {
            let mut acc = 0.0;
            for (ki, w) in kernel.iter().enumerate() {
                let src = reflect(col as isize + ki as isize - r, cols);
                acc += w * img[(row, src)];
            }
            tmp[(row, col)] = acc;
        }
    }
    // Vertical pass.
    let mut out = Image::zeros((rows, cols));
    for row in 0..rows {
        for col in 0..cols {
            let mut acc = 0.0;
            for (ki, w) in kernel.iter().enumerate() {
                let src = reflect(row as isize + ki as isize - r, rows);
                acc += w * tmp[(src, col)];
            }
            out[(row, col)] = acc;
        }
    }
    Ok(out)
}

/// Central-difference gradients (one-sided at the borders).
/// Returns `(gx, gy)` = (column-wise, row-wise) derivatives.
fn gradients(img: &Image) -> (Image, Image) {
    let (rows, cols) = img.dim();
    let mut gx = Image::zeros((rows, cols));
    let mut gy = Image::zeros((rows, cols));
    for r in 0..rows {
        for c in 0..cols {
            gx[(r, c)] = if cols == 1 {
                0.0
            } else if c == 0 {
                img[(r, 1)] - img[(r, 0)]
            } else if c == cols - 1 {
                img[(r, c)] - img[(r, c - 1)]
            } else {
                (img[(r, c + 1)] - img[(r, c - 1)]) / 2.0
            };
            gy[(r, c)] = if rows == 1 {
                0.0
            } else if r == 0 {
                img[(1, c)] - img[(0, c)]
            } else if r == rows - 1 {
                img[(r, c)] - img[(r - 1, c)]
            } else {
                (img[(r + 1, c)] - img[(r - 1, c)]) / 2.0
            };
        }
    }
    (gx, gy)
}

/// Structure-tensor field: smooth at `sigma`, differentiate, then smooth the
/// gradient products at the integration scale `alpha`.
pub fn structure_field(img: &Image, sigma: f64, alpha: f64) -> Result<StructureField> {
    if img.is_empty() {
        return Err(Error::InvalidParameter("empty image".into()));
    }
    if img.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("image passed to structure_field".into()));
    }
    let smoothed = gaussian_blur(img, sigma)?;
    let (gx, gy) = gradients(&smoothed);
    let j11 = gaussian_blur(&(&gx * &gx), alpha)?;
    let j22 = gaussian_blur(&(&gy * &gy), alpha)?;
    let j12 = gaussian_blur(&(&gx * &gy), alpha)?;
    Ok(StructureField { j11, j12, j22 })
}

/// Per-pixel eigenvalue difference `2 * sqrt((j22 - j11)^2 + 4*j12^2)` of the
/// structure field: ~0 on flat areas and compact blobs, large along edges.
///
/// The constant factor is immaterial because the weight map normalizes the
/// feature to `[0, 1]` before exponentiation.
pub fn edge_feature(field: &StructureField) -> Image {
    let mut out = Image::zeros(field.j11.dim());
    ndarray::Zip::from(&mut out)
        .and(&field.j11)
        .and(&field.j12)
        .and(&field.j22)
        .for_each(|o, &a, &b, &d| {
            *o = 2.0 * ((d - a) * (d - a) + 4.0 * b * b).sqrt();
        });
    out
}

/// Local-structure weight map `exp(h * (v - min) / (max - min))`, entries in
/// `[1, exp(h)]`. A featureless map (max == min) degenerates to all ones.
pub fn local_structure_weight(feature: &Image, h: f64) -> Result<Image> {
    if !h.is_finite() || h < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "weight gain h must be finite and >= 0, got {h}"
        )));
    }
    let lo = feature.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = feature.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Ok(Image::from_elem(feature.dim(), 1.0));
    }
    let scale = h / (hi - lo);
    Ok(feature.mapv(|v| ((v - lo) * scale).exp()))
}

/// 8-bit visualization of the weight map: `-exp(-h * normalized_feature)`
/// min-max stretched to `0..=255`, so edges render bright.
pub fn weight_display(feature: &Image, h: f64) -> ndarray::Array2<u8> {
    let lo = feature.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = feature.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return ndarray::Array2::zeros(feature.dim());
    }
    let neg = feature.mapv(|v| -(-h * (v - lo) / (hi - lo)).exp());
    let nlo = neg.iter().copied().fold(f64::INFINITY, f64::min);
    let nhi = neg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(nhi > nlo) {
        return ndarray::Array2::zeros(feature.dim());
    }
    neg.mapv(|v| ((v - nlo) / (nhi - nlo) * 255.0).round() as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn step_edge(rows: usize, cols: usize, at: usize) -> Image {
        Image::from_shape_fn((rows, cols), |(_, c)| if c < at { 10.0 } else { 90.0 })
    }

    #[test]
    fn reflect_duplicates_the_edge() {
        // Boundary order just outside [0, 3] is a a b c d d c b.
        assert_eq!(reflect(-1, 4), 0);
        assert_eq!(reflect(-2, 4), 1);
        assert_eq!(reflect(4, 4), 3);
        assert_eq!(reflect(5, 4), 2);
        assert_eq!(reflect(2, 1), 0);
    }

    #[test]
    fn blur_preserves_constants_and_rejects_bad_sigma() {
        let img = Image::from_elem((9, 9), 42.0);
        let out = gaussian_blur(&img, 1.5).unwrap();
        for &v in out.iter() {
            assert_abs_diff_eq!(v, 42.0, epsilon = 1e-12);
        }
        assert!(gaussian_blur(&img, -1.0).is_err());
        assert!(gaussian_blur(&img, f64::NAN).is_err());
        assert_eq!(gaussian_blur(&img, 0.0).unwrap(), img);
    }

    #[test]
    fn blur_impulse_matches_sampled_gaussian() {
        let mut img = Image::zeros((21, 21));
        img[(10, 10)] = 1.0;
        let sigma = 1.0;
        let out = gaussian_blur(&img, sigma).unwrap();
        // Direct evaluation of the normalized separable kernel, interior only.
        let radius = 3i32;
        let w = |k: i32| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp();
        let total: f64 = (-radius..=radius).map(w).sum();
        for dr in -radius..=radius {
            for dc in -radius..=radius {
                let expect = w(dr) / total * (w(dc) / total);
                let got = out[((10 + dr) as usize, (10 + dc) as usize)];
                assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn vertical_edge_loads_j11_not_j22() {
        let img = step_edge(24, 24, 12);
        let field = structure_field(&img, 1.0, 2.0).unwrap();
        // Along the edge interior, horizontal gradient energy dominates.
        let p = (12, 12);
        assert!(field.j11[p] > 10.0 * field.j22[p].max(1e-9));
        assert!(field.j12[p].abs() < field.j11[p] * 1e-6);
        let feature = edge_feature(&field);
        // The edge scores far above a flat area.
        assert!(feature[(12, 12)] > 100.0 * feature[(12, 2)].max(1e-12));
    }

    #[test]
    fn rotating_the_image_swaps_j11_and_j22() {
        let img = step_edge(20, 20, 9);
        let rotated = Image::from_shape_fn((20, 20), |(r, c)| img[(c, r)]);
        let f = structure_field(&img, 1.0, 2.0).unwrap();
        let g = structure_field(&rotated, 1.0, 2.0).unwrap();
        for r in 0..20 {
            for c in 0..20 {
                assert_abs_diff_eq!(f.j11[(r, c)], g.j22[(c, r)], epsilon = 1e-9);
                assert_abs_diff_eq!(f.j22[(r, c)], g.j11[(c, r)], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn field_is_positive_semidefinite() {
        let img = Image::from_shape_fn((30, 30), |(r, c)| {
            (r as f64 * 0.7).sin() * 20.0 + (c as f64 * 0.4).cos() * 15.0 + 50.0
        });
        let field = structure_field(&img, 1.0, 2.0).unwrap();
        for r in 0..30 {
            for c in 0..30 {
                let (a, b, d) = (field.j11[(r, c)], field.j12[(r, c)], field.j22[(r, c)]);
                assert!(a >= 0.0 && d >= 0.0);
                assert!(a * d - b * b >= -1e-9 * (a * d).max(1.0));
            }
        }
    }

    #[test]
    fn eigen_difference_hand_value() {
        let field = StructureField {
            j11: Image::from_elem((1, 1), 1.0),
            j12: Image::zeros((1, 1)),
            j22: Image::zeros((1, 1)),
        };
        assert_abs_diff_eq!(edge_feature(&field)[(0, 0)], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn weight_range_and_degenerate_flat_image() {
        let img = step_edge(24, 24, 12);
        let h = 10.0;
        let feature = edge_feature(&structure_field(&img, 1.0, 2.0).unwrap());
        let w = local_structure_weight(&feature, h).unwrap();
        let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, h.exp(), epsilon = 1e-6);
        // A constant image has an exactly-zero feature map -> all-ones weights.
        let flat = Image::from_elem((10, 10), 7.0);
        let feature = edge_feature(&structure_field(&flat, 1.0, 2.0).unwrap());
        let w = local_structure_weight(&feature, h).unwrap();
        assert!(w.iter().all(|&v| v == 1.0));
        assert!(local_structure_weight(&feature, -1.0).is_err());
    }

    #[test]
    fn compact_blob_scores_far_below_an_edge() {
        // A long step edge plus a small Gaussian blob: the blob is
        // corner-like (isotropic gradients), so its weight stays near 1.
        let mut img = step_edge(48, 48, 10);
        let (br, bc) = (30.0, 34.0);
        for r in 0..48 {
            for c in 0..48 {
                let d2 = (r as f64 - br).powi(2) + (c as f64 - bc).powi(2);
                img[(r, c)] += 120.0 * (-d2 / (2.0 * 1.2f64.powi(2))).exp();
            }
        }
        let feature = edge_feature(&structure_field(&img, 1.0, 2.0).unwrap());
        let w = local_structure_weight(&feature, 10.0).unwrap();
        let edge_w = (0..48).map(|r| w[(r, 10)]).fold(0.0f64, f64::max);
        let blob_w = w[(30, 34)];
        assert!(
            blob_w < edge_w / 10.0,
            "blob weight {blob_w} should be far below edge weight {edge_w}"
        );
    }

    #[test]
    fn display_map_is_full_range_and_degenerate_safe() {
        let img = step_edge(16, 16, 8);
        let feature = edge_feature(&structure_field(&img, 1.0, 2.0).unwrap());
        let disp = weight_display(&feature, 10.0);
        assert_eq!(disp.iter().copied().max(), Some(255));
        assert_eq!(disp.iter().copied().min(), Some(0));
        let flat = weight_display(&Image::zeros((4, 4)), 10.0);
        assert!(flat.iter().all(|&v| v == 0));
    }
}
