//! Detection-quality metrics, ROC sweeps, and ground-truth bookkeeping.
//!
//! Quality is scored per target box: the box's `d`-wide surrounding frame is
//! the "background neighborhood", and all three report values are ratios of
//! an output-image statistic to the same input-image statistic, so perfect
//! clutter suppression drives them toward `+inf` (a zero denominator is
//! reported as `+inf`, never an error). Detection matching for ROC curves is
//! centroid-in-box with at most one detection credited per box.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::Image;
use crate::pipeline::{detections_above, Detection};
use crate::util::mean_std;

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

/// Axis-aligned true-target box: top-left pixel `(row, col)`, extent `a x b`
/// (rows x cols).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetBox {
    pub row: usize,
    pub col: usize,
    pub a: usize,
    pub b: usize,
}

impl TargetBox {
    /// Whether a (possibly fractional) pixel-center coordinate lies inside
    /// the box's pixel grid, bounds inclusive.
    pub fn contains(&self, row: f64, col: f64) -> bool {
        row >= self.row as f64
            && row <= (self.row + self.a - 1) as f64
            && col >= self.col as f64
            && col <= (self.col + self.b - 1) as f64
    }

    fn check_inside(&self, dims: (usize, usize)) -> Result<()> {
        if self.a == 0 || self.b == 0 {
            return Err(Error::InvalidParameter("empty target box".into()));
        }
        if self.row + self.a > dims.0 || self.col + self.b > dims.1 {
            return Err(Error::InvalidParameter(format!(
                "target box {self:?} exceeds image dims {dims:?}"
            )));
        }
        Ok(())
    }
}

/// Per-frame ground truth, keyed by frame stem, as stored on disk.
pub type TruthMap = BTreeMap<String, Vec<TargetBox>>;

/// Read a ground-truth JSON file (`{"frame_stem": [{row, col, a, b}, ...]}`).
pub fn read_truth(path: &Path) -> Result<TruthMap> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::malformed(path.display().to_string(), e.to_string()))
}

/// Write a ground-truth JSON file with stable key order.
pub fn write_truth(path: &Path, truth: &TruthMap) -> Result<()> {
    let mut text = serde_json::to_string_pretty(truth)
        .map_err(|e| Error::malformed("ground truth", e.to_string()))?;
    text.push('\n');
    Ok(std::fs::write(path, text)?)
}

// ---------------------------------------------------------------------------
// Local metrics
// ---------------------------------------------------------------------------

/// Gain metrics for one target box; `+inf` marks total clutter suppression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    /// Local signal-to-noise-ratio gain: (box max / neighborhood max), output
    /// over input.
    pub lsnrg: f64,
    /// Background suppression factor: neighborhood std, input over output.
    pub bsf: f64,
    /// Signal-to-clutter-ratio gain: `|mean_box - mean_nbhd| / std_nbhd`,
    /// output over input.
    pub scrg: f64,
}

/// `num / den` with every zero denominator mapped to `+inf` (and `inf/inf`
/// pinned to `+inf` rather than NaN).
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 || (num.is_infinite() && den.is_infinite()) {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Pixel values of the box interior and of its `d`-wide surrounding frame
/// (clipped at the image border).
pub(crate) fn split_regions(img: &Image, tb: &TargetBox, d: usize) -> (Vec<f64>, Vec<f64>) {
    let (rows, cols) = img.dim();
    let r0 = tb.row.saturating_sub(d);
    let c0 = tb.col.saturating_sub(d);
    let r1 = (tb.row + tb.a + d).min(rows);
    let c1 = (tb.col + tb.b + d).min(cols);
    let mut inside = Vec::with_capacity(tb.a * tb.b);
    let mut around = Vec::with_capacity((r1 - r0) * (c1 - c0));
    for r in r0..r1 {
        for c in c0..c1 {
            let in_box = r >= tb.row && r < tb.row + tb.a && c >= tb.col && c < tb.col + tb.b;
            if in_box {
                inside.push(img[(r, c)]);
            } else {
                around.push(img[(r, c)]);
            }
        }
    }
    (inside, around)
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Local SNR of one box: box maximum over neighborhood maximum.
fn lsnr(img: &Image, tb: &TargetBox, d: usize) -> f64 {
    let (inside, around) = split_regions(img, tb, d);
    ratio(max_of(&inside), max_of(&around))
}

/// Signal-to-clutter ratio of one box: `|mean_box - mean_nbhd| / std_nbhd`.
pub fn scr(img: &Image, tb: &TargetBox, d: usize) -> Result<f64> {
    tb.check_inside(img.dim())?;
    let (inside, around) = split_regions(img, tb, d);
    let (mu_t, _) = mean_std(&inside);
    let (mu_b, sigma_b) = mean_std(&around);
    Ok(ratio((mu_t - mu_b).abs(), sigma_b))
}

/// Score how much one processing stage improved the neighborhood of a target:
/// LSNR gain, background suppression factor, and SCR gain, each the output
/// statistic over the input statistic with zero denominators reported as
/// `+inf`.
pub fn metrics(in_img: &Image, out_img: &Image, tb: &TargetBox, d: usize) -> Result<MetricsReport> {
    if in_img.dim() != out_img.dim() {
        return Err(Error::ShapeMismatch(format!(
            "input image is {:?} but output image is {:?}",
            in_img.dim(),
            out_img.dim()
        )));
    }
    tb.check_inside(in_img.dim())?;
    let lsnrg = ratio(lsnr(out_img, tb, d), lsnr(in_img, tb, d));
    let (_, sigma_in) = mean_std(&split_regions(in_img, tb, d).1);
    let (_, sigma_out) = mean_std(&split_regions(out_img, tb, d).1);
    let bsf = ratio(sigma_in, sigma_out);
    let scrg = ratio(scr(out_img, tb, d)?, scr(in_img, tb, d)?);
    Ok(MetricsReport { lsnrg, bsf, scrg })
}

// ---------------------------------------------------------------------------
// Detection matching and ROC
// ---------------------------------------------------------------------------

/// Match candidate detections against truth boxes: each box claims the
/// unclaimed detection of highest peak whose centroid it contains. Returns
/// `(true_detections, false_detections)`.
pub fn match_detections(detections: &[Detection], boxes: &[TargetBox]) -> (usize, usize) {
    let mut used = vec![false; detections.len()];
    let mut matched = 0usize;
    for tb in boxes {
        let best = detections
            .iter()
            .enumerate()
            .filter(|(i, det)| !used[*i] && tb.contains(det.row, det.col))
            .max_by(|(_, a), (_, b)| a.peak.total_cmp(&b.peak))
            .map(|(i, _)| i);
        if let Some(i) = best {
            used[i] = true;
            matched += 1;
        }
    }
    (matched, detections.len() - matched)
}

/// One operating point of a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    /// True detections over actual targets, in `[0, 1]`.
    pub pd: f64,
    /// False detections per frame.
    pub fa: f64,
}

/// Sweep `n_thresholds` levels across the pooled value range of the score
/// images; at each level the pixels strictly above it form 8-connected
/// candidate detections which are matched against the per-frame truth.
///
/// Frames with no truth boxes contribute only false detections. Points come
/// back ordered by increasing threshold.
pub fn roc(
    score_imgs: &[Image],
    truths: &[Vec<TargetBox>],
    n_thresholds: usize,
) -> Result<Vec<RocPoint>> {
    if score_imgs.is_empty() {
        return Err(Error::InvalidParameter("no frames to sweep".into()));
    }
    if score_imgs.len() != truths.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} score images but {} truth entries",
            score_imgs.len(),
            truths.len()
        )));
    }
    if n_thresholds < 1 {
        return Err(Error::InvalidParameter(
            "need at least one threshold".into(),
        ));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for img in score_imgs {
        for &v in img.iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite("score image".into()));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    for (img, boxes) in score_imgs.iter().zip(truths) {
        for tb in boxes {
            tb.check_inside(img.dim())?;
        }
    }

    let total_boxes: usize = truths.iter().map(Vec::len).sum();
    let n_frames = score_imgs.len() as f64;
    let mut points = Vec::with_capacity(n_thresholds);
    for k in 0..n_thresholds {
        let frac = if n_thresholds == 1 {
            0.0
        } else {
            k as f64 / (n_thresholds - 1) as f64
        };
        let threshold = lo + (hi - lo) * frac;
        let mut n_true = 0usize;
        let mut n_false = 0usize;
        for (img, boxes) in score_imgs.iter().zip(truths) {
            let dets = detections_above(img, threshold);
            let (t, f) = match_detections(&dets, boxes);
            n_true += t;
            n_false += f;
        }
        let pd = if total_boxes == 0 {
            1.0
        } else {
            n_true as f64 / total_boxes as f64
        };
        points.push(RocPoint {
            threshold,
            pd,
            fa: n_false as f64 / n_frames,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// 12x12 ramp-ish image with a bright 3x3 box at (4, 5).
    fn sample_pair() -> (Image, Image, TargetBox) {
        let tb = TargetBox {
            row: 4,
            col: 5,
            a: 3,
            b: 3,
        };
        let in_img = Image::from_shape_fn((12, 12), |(r, c)| {
            20.0 + r as f64 * 1.5 + c as f64 * 0.5 + if tb.contains(r as f64, c as f64) { 30.0 } else { 0.0 }
        });
        let out_img = Image::from_shape_fn((12, 12), |(r, c)| {
            if tb.contains(r as f64, c as f64) {
                40.0 + r as f64
            } else {
                1.0 + 0.1 * ((r * 12 + c) % 5) as f64
            }
        });
        (in_img, out_img, tb)
    }

    #[test]
    fn box_containment_is_inclusive_of_edges() {
        let tb = TargetBox {
            row: 2,
            col: 3,
            a: 4,
            b: 2,
        };
        assert!(tb.contains(2.0, 3.0));
        assert!(tb.contains(5.0, 4.0));
        assert!(tb.contains(3.5, 3.9));
        assert!(!tb.contains(1.9, 3.0));
        assert!(!tb.contains(5.1, 4.0));
        assert!(!tb.contains(3.0, 4.5));
    }

    #[test]
    fn metrics_match_a_direct_hand_computation() {
        let (in_img, out_img, tb) = sample_pair();
        let d = 3;
        // Independent re-derivation with explicit loops.
        let stats = |img: &Image| {
            let mut box_vals = Vec::new();
            let mut ring_vals = Vec::new();
            for r in 0..12usize {
                for c in 0..12usize {
                    let in_box = tb.contains(r as f64, c as f64);
                    let in_frame = r + d >= tb.row
                        && r < tb.row + tb.a + d
                        && c + d >= tb.col
                        && c < tb.col + tb.b + d;
                    if in_box {
                        box_vals.push(img[(r, c)]);
                    } else if in_frame {
                        ring_vals.push(img[(r, c)]);
                    }
                }
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let sd = |v: &[f64]| {
                let m = mean(v);
                (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
            };
            let peak = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (
                peak(&box_vals) / peak(&ring_vals),
                sd(&ring_vals),
                (mean(&box_vals) - mean(&ring_vals)).abs() / sd(&ring_vals),
            )
        };
        let (lsnr_in, sd_in, scr_in) = stats(&in_img);
        let (lsnr_out, sd_out, scr_out) = stats(&out_img);
        let got = metrics(&in_img, &out_img, &tb, d).unwrap();
        assert_relative_eq!(got.lsnrg, lsnr_out / lsnr_in, epsilon = 1e-12);
        assert_relative_eq!(got.bsf, sd_in / sd_out, epsilon = 1e-12);
        assert_relative_eq!(got.scrg, scr_out / scr_in, epsilon = 1e-12);
        assert_relative_eq!(scr(&in_img, &tb, d).unwrap(), scr_in, epsilon = 1e-12);
    }

    #[test]
    fn identity_processing_scores_exactly_one() {
        let (in_img, _, tb) = sample_pair();
        let got = metrics(&in_img, &in_img, &tb, 3).unwrap();
        assert_eq!(got.lsnrg, 1.0);
        assert_eq!(got.bsf, 1.0);
        assert_eq!(got.scrg, 1.0);
    }

    #[test]
    fn zeroed_output_neighborhood_reports_infinity() {
        let (in_img, _, tb) = sample_pair();
        let mut out = Image::zeros((12, 12));
        out[(5, 6)] = 80.0;
        let got = metrics(&in_img, &out, &tb, 3).unwrap();
        assert_eq!(got.lsnrg, f64::INFINITY);
        assert_eq!(got.bsf, f64::INFINITY);
        assert_eq!(got.scrg, f64::INFINITY);
    }

    #[test]
    fn output_scaling_leaves_gains_fixed_and_rescales_bsf() {
        // The gain metrics compare the output against itself (numerator and
        // denominator both live in the output frame), so a positive rescale
        // cancels. The suppression factor divides an input spread by an
        // output spread, so it picks up the reciprocal of the scale.
        let (in_img, out_img, tb) = sample_pair();
        let base = metrics(&in_img, &out_img, &tb, 3).unwrap();
        for c in [0.25, 3.0, 117.0] {
            let scaled = out_img.mapv(|v| v * c);
            let got = metrics(&in_img, &scaled, &tb, 3).unwrap();
            assert_relative_eq!(got.lsnrg, base.lsnrg, max_relative = 1e-12);
            assert_relative_eq!(got.bsf, base.bsf / c, max_relative = 1e-12);
            assert_relative_eq!(got.scrg, base.scrg, max_relative = 1e-12);
        }
    }

    #[test]
    fn out_of_bounds_or_empty_boxes_are_rejected() {
        let (in_img, out_img, _) = sample_pair();
        let outside = TargetBox {
            row: 10,
            col: 10,
            a: 5,
            b: 2,
        };
        assert!(metrics(&in_img, &out_img, &outside, 3).is_err());
        let empty = TargetBox {
            row: 0,
            col: 0,
            a: 0,
            b: 1,
        };
        assert!(metrics(&in_img, &out_img, &empty, 3).is_err());
        let small = Image::zeros((5, 5));
        assert!(metrics(&in_img, &small, &outside, 3).is_err());
    }

    #[test]
    fn corner_box_clips_its_neighborhood() {
        // A box flush with the origin still works; the frame just has fewer
        // pixels on two sides.
        let img = Image::from_shape_fn((8, 8), |(r, c)| (r * 8 + c) as f64);
        let tb = TargetBox {
            row: 0,
            col: 0,
            a: 2,
            b: 2,
        };
        let (inside, around) = split_regions(&img, &tb, 2);
        assert_eq!(inside.len(), 4);
        assert_eq!(around.len(), 4 * 4 - 4);
        assert!(metrics(&img, &img, &tb, 2).is_ok());
    }

    fn blob(img: &mut Image, row: f64, col: f64, amp: f64) {
        let (rows, cols) = img.dim();
        for r in 0..rows {
            for c in 0..cols {
                let d2 = (r as f64 - row).powi(2) + (c as f64 - col).powi(2);
                img[(r, c)] += amp * (-d2 / 4.5).exp();
            }
        }
    }

    /// Three frames: target blob in a box, plus one clutter blob on frame 2.
    ///
    /// Tails are cut well above roundoff so the two supports stay disjoint
    /// components at every threshold; merged components would drag the
    /// weighted centroid off the blob centers.
    fn roc_fixture() -> (Vec<Image>, Vec<Vec<TargetBox>>) {
        let tb = TargetBox {
            row: 12,
            col: 14,
            a: 7,
            b: 7,
        };
        let mut imgs = Vec::new();
        for k in 0..3 {
            let mut img = Image::zeros((32, 32));
            blob(&mut img, 15.0, 17.0, 200.0 - 20.0 * k as f64);
            if k == 2 {
                blob(&mut img, 3.0, 4.0, 60.0);
            }
            imgs.push(img.mapv(|v| if v < 1e-3 { 0.0 } else { v }));
        }
        (imgs, vec![vec![tb]; 3])
    }

    #[test]
    fn roc_ends_at_zero_and_starts_fully_detected() {
        let (imgs, truths) = roc_fixture();
        let pts = roc(&imgs, &truths, 40).unwrap();
        assert_eq!(pts.len(), 40);
        let first = pts.first().unwrap();
        // Threshold == pooled minimum (0): every positive blob is found.
        assert_eq!(first.threshold, 0.0);
        assert_eq!(first.pd, 1.0);
        assert_relative_eq!(first.fa, 1.0 / 3.0, epsilon = 1e-12);
        // Threshold == pooled maximum: strict comparison leaves nothing.
        let last = pts.last().unwrap();
        assert_eq!(last.pd, 0.0);
        assert_eq!(last.fa, 0.0);
    }

    #[test]
    fn roc_is_monotone_in_threshold_on_blob_scenes() {
        let (imgs, truths) = roc_fixture();
        let pts = roc(&imgs, &truths, 60).unwrap();
        for pair in pts.windows(2) {
            assert!(pair[1].threshold >= pair[0].threshold);
            assert!(pair[1].pd <= pair[0].pd + 1e-15);
            assert!(pair[1].fa <= pair[0].fa + 1e-15);
        }
    }

    #[test]
    fn clean_positive_support_gives_perfect_point_at_zero() {
        // Positive only inside the truth box: Pd = 1, Fa = 0 at threshold 0.
        let tb = TargetBox {
            row: 6,
            col: 6,
            a: 3,
            b: 3,
        };
        let mut img = Image::zeros((16, 16));
        img[(7, 7)] = 9.0;
        img[(7, 8)] = 4.0;
        let pts = roc(&[img], &[vec![tb]], 10).unwrap();
        assert_eq!(pts[0].threshold, 0.0);
        assert_eq!(pts[0].pd, 1.0);
        assert_eq!(pts[0].fa, 0.0);
    }

    #[test]
    fn roc_rejects_bad_inputs() {
        let (imgs, truths) = roc_fixture();
        assert!(roc(&[], &[], 10).is_err());
        assert!(roc(&imgs, &truths[..2].to_vec(), 10).is_err());
        assert!(roc(&imgs, &truths, 0).is_err());
    }

    #[test]
    fn matching_takes_highest_peak_once_per_box() {
        let tb = TargetBox {
            row: 0,
            col: 0,
            a: 10,
            b: 10,
        };
        let det = |row: f64, col: f64, peak: f64| Detection {
            row,
            col,
            pixels: 1,
            peak,
        };
        // Two candidates inside one box: exactly one true, one false.
        let dets = vec![det(2.0, 2.0, 5.0), det(7.0, 7.0, 9.0), det(20.0, 20.0, 3.0)];
        let (t, f) = match_detections(&dets, &[tb]);
        assert_eq!((t, f), (1, 2));
        // Two boxes, two separated candidates: both true.
        let other = TargetBox {
            row: 18,
            col: 18,
            a: 5,
            b: 5,
        };
        let (t, f) = match_detections(&dets, &[tb, other]);
        assert_eq!((t, f), (2, 1));
        // No candidates: nothing matched, nothing false.
        assert_eq!(match_detections(&[], &[tb]), (0, 0));
    }

    #[test]
    fn truth_files_round_trip_with_sorted_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("truth.json");
        let mut truth = TruthMap::new();
        truth.insert(
            "frame_0001".into(),
            vec![TargetBox {
                row: 3,
                col: 4,
                a: 7,
                b: 7,
            }],
        );
        truth.insert("frame_0000".into(), vec![]);
        write_truth(&path, &truth).unwrap();
        let back = read_truth(&path).unwrap();
        assert_eq!(back, truth);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.find("frame_0000").unwrap() < text.find("frame_0001").unwrap());
        assert!(read_truth(&dir.path().join("missing.json")).is_err());
        std::fs::write(&path, "not json").unwrap();
        assert!(read_truth(&path).is_err());
    }
}
