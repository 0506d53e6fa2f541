//! Seeded synthetic infrared scenes: cloud-like clutter, one compact
//! Gaussian target, optional sensor noise, and the matching ground truth.
//!
//! Each frame is generated from its own deterministic RNG stream derived
//! from `(seed, frame index)`, so any frame of a sequence can be regenerated
//! independently. The target amplitude can be given directly or derived in
//! closed form from a requested signal-to-clutter ratio measured over the
//! truth box and its surrounding frame.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::eval::{split_regions, TargetBox};
use crate::image_io::Image;
use crate::util::mean_std;

/// Neighborhood width used when deriving amplitude from a requested SCR;
/// matches the metrics convention.
pub const SCR_NEIGHBORHOOD: usize = 20;

/// Scene recipe. `..Default::default()` fills the standard values; the same
/// keys are accepted from a `key = value` spec file via [`SceneSpec::from_kv`].
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    /// Number of frames in the sequence.
    pub frames: usize,
    pub rows: usize,
    pub cols: usize,
    /// Sequence seed; each frame derives its own stream from it.
    pub seed: u64,
    /// Clutter floor in gray levels.
    pub base: f64,
    /// Clutter ceiling in gray levels (the blob field is rescaled into
    /// `[base, cap]`).
    pub cap: f64,
    /// Clutter blob count is drawn uniformly from `blobs_min..=blobs_max`.
    pub blobs_min: usize,
    pub blobs_max: usize,
    /// Clutter blob spreads are drawn uniformly from
    /// `[spread_min, spread_max]` pixels.
    pub spread_min: f64,
    pub spread_max: f64,
    /// Target center; `None` puts it at the frame center.
    pub target_row: Option<usize>,
    pub target_col: Option<usize>,
    /// Std of the isotropic Gaussian target; its 3-sigma box must fit in
    /// 9x9 pixels.
    pub target_spread: f64,
    /// Peak amplitude in gray levels; takes precedence over `target_scr`.
    /// An explicit 0 disables the target entirely.
    pub target_amplitude: Option<f64>,
    /// Desired signal-to-clutter ratio of the clean frame; the amplitude is
    /// derived from the generated clutter statistics.
    pub target_scr: Option<f64>,
    /// Std of white Gaussian sensor noise added last; 0 disables it.
    pub noise_std: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            frames: 1,
            rows: 200,
            cols: 200,
            seed: 7,
            base: 40.0,
            cap: 140.0,
            blobs_min: 5,
            blobs_max: 15,
            spread_min: 20.0,
            spread_max: 60.0,
            target_row: None,
            target_col: None,
            target_spread: 1.2,
            target_amplitude: None,
            target_scr: Some(4.0),
            noise_std: 0.0,
        }
    }
}

/// Spec-file keys accepted by [`SceneSpec::from_kv`].
const SPEC_KEYS: &[&str] = &[
    "frames",
    "rows",
    "cols",
    "seed",
    "base",
    "cap",
    "blobs_min",
    "blobs_max",
    "spread_min",
    "spread_max",
    "target_row",
    "target_col",
    "target_spread",
    "target_amplitude",
    "target_scr",
    "noise_std",
];

impl SceneSpec {
    /// Build a spec from parsed `key = value` text, starting from defaults.
    pub fn from_kv(map: &std::collections::BTreeMap<String, String>) -> Result<Self> {
        crate::config::reject_unknown(map, SPEC_KEYS)?;
        let mut spec = SceneSpec::default();
        let g = crate::config::get::<usize>;
        if let Some(v) = g(map, "frames")? {
            spec.frames = v;
        }
        if let Some(v) = g(map, "rows")? {
            spec.rows = v;
        }
        if let Some(v) = g(map, "cols")? {
            spec.cols = v;
        }
        if let Some(v) = crate::config::get::<u64>(map, "seed")? {
            spec.seed = v;
        }
        let f = crate::config::get::<f64>;
        if let Some(v) = f(map, "base")? {
            spec.base = v;
        }
        if let Some(v) = f(map, "cap")? {
            spec.cap = v;
        }
        if let Some(v) = g(map, "blobs_min")? {
            spec.blobs_min = v;
        }
        if let Some(v) = g(map, "blobs_max")? {
            spec.blobs_max = v;
        }
        if let Some(v) = f(map, "spread_min")? {
            spec.spread_min = v;
        }
        if let Some(v) = f(map, "spread_max")? {
            spec.spread_max = v;
        }
        spec.target_row = g(map, "target_row")?.or(spec.target_row);
        spec.target_col = g(map, "target_col")?.or(spec.target_col);
        if let Some(v) = f(map, "target_spread")? {
            spec.target_spread = v;
        }
        if let Some(v) = f(map, "target_amplitude")? {
            spec.target_amplitude = Some(v);
        }
        if let Some(v) = f(map, "target_scr")? {
            spec.target_scr = Some(v);
        }
        if let Some(v) = f(map, "noise_std")? {
            spec.noise_std = v;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Check ranges and that the target's 3-sigma box fits the frame.
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidParameter(
                "frames, rows, and cols must all be >= 1".into(),
            ));
        }
        for (name, v) in [
            ("base", self.base),
            ("cap", self.cap),
            ("spread_min", self.spread_min),
            ("spread_max", self.spread_max),
            ("noise_std", self.noise_std),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if self.cap < self.base {
            return Err(Error::InvalidParameter(format!(
                "cap ({}) must be >= base ({})",
                self.cap, self.base
            )));
        }
        if self.blobs_min > self.blobs_max || self.spread_min > self.spread_max {
            return Err(Error::InvalidParameter(
                "clutter ranges must satisfy min <= max".into(),
            ));
        }
        if !self.target_spread.is_finite() || self.target_spread <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "target_spread must be finite and > 0, got {}",
                self.target_spread
            )));
        }
        if target_radius(self.target_spread) > 4 {
            return Err(Error::InvalidParameter(format!(
                "target_spread {} has a 3-sigma support wider than 9x9 pixels",
                self.target_spread
            )));
        }
        if let Some(a) = self.target_amplitude {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "target_amplitude must be finite and >= 0, got {a}"
                )));
            }
        }
        if let Some(s) = self.target_scr {
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "target_scr must be finite and > 0, got {s}"
                )));
            }
        }
        let (cr, cc) = self.target_center();
        let r = target_radius(self.target_spread);
        if cr < r || cc < r || cr + r >= self.rows || cc + r >= self.cols {
            return Err(Error::InvalidParameter(format!(
                "target at ({cr}, {cc}) with radius {r} leaves the {}x{} frame",
                self.rows, self.cols
            )));
        }
        Ok(())
    }

    /// Target center, defaulting to the frame center.
    pub fn target_center(&self) -> (usize, usize) {
        (
            self.target_row.unwrap_or(self.rows / 2),
            self.target_col.unwrap_or(self.cols / 2),
        )
    }
}

/// Half-width of the target's 3-sigma support.
fn target_radius(spread: f64) -> usize {
    (3.0 * spread).ceil() as usize
}

/// Canonical frame file stem (`frame_0003`) shared by the generator CLI and
/// ground-truth keys.
pub fn frame_stem(idx: usize) -> String {
    format!("frame_{idx:04}")
}

/// Per-frame RNG stream: frames are decorrelated by a fixed odd multiplier so
/// regenerating frame `k` alone matches its value inside a full run.
fn frame_rng(seed: u64, idx: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add((idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Generate frame `idx` of the sequence plus its ground-truth boxes.
///
/// Construction: anisotropic Gaussian clutter blobs are summed and rescaled
/// into `[base, cap]`; the target (if any) is added on top, truncated to its
/// 3-sigma box, which is also the reported truth box; white noise comes last.
pub fn gen_scene(spec: &SceneSpec, idx: usize) -> Result<(Image, Vec<TargetBox>)> {
    spec.validate()?;
    if idx >= spec.frames {
        return Err(Error::InvalidParameter(format!(
            "frame index {idx} outside 0..{}",
            spec.frames
        )));
    }
    let mut rng = frame_rng(spec.seed, idx);
    let (rows, cols) = (spec.rows, spec.cols);

    // Cloud-like clutter: a handful of broad rotated Gaussian bumps.
    let n_blobs = rng.gen_range(spec.blobs_min..=spec.blobs_max);
    let mut clutter = Image::zeros((rows, cols));
    for _ in 0..n_blobs {
        let cr = rng.gen_range(0.0..rows as f64);
        let cc = rng.gen_range(0.0..cols as f64);
        let sr = rng.gen_range(spec.spread_min..=spec.spread_max);
        let sc = rng.gen_range(spec.spread_min..=spec.spread_max);
        let theta = rng.gen_range(0.0..std::f64::consts::PI);
        let amp = rng.gen_range(0.4..=1.0);
        let (sin, cos) = theta.sin_cos();
        for r in 0..rows {
            for c in 0..cols {
                let dr = r as f64 - cr;
                let dc = c as f64 - cc;
                let u = dr * cos + dc * sin;
                let v = -dr * sin + dc * cos;
                clutter[(r, c)] +=
                    amp * (-u * u / (2.0 * sr * sr) - v * v / (2.0 * sc * sc)).exp();
            }
        }
    }
    let lo = clutter.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = clutter.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut img = if hi > lo {
        clutter.mapv(|v| spec.base + (spec.cap - spec.base) * (v - lo) / (hi - lo))
    } else {
        Image::from_elem((rows, cols), spec.base)
    };

    // Target and truth box.
    let (cr, cc) = spec.target_center();
    let radius = target_radius(spec.target_spread);
    let tb = TargetBox {
        row: cr - radius,
        col: cc - radius,
        a: 2 * radius + 1,
        b: 2 * radius + 1,
    };
    let amplitude = resolve_amplitude(spec, &img, &tb)?;
    let mut truth = Vec::new();
    if amplitude > 0.0 {
        let s2 = 2.0 * spec.target_spread * spec.target_spread;
        for r in tb.row..tb.row + tb.a {
            for c in tb.col..tb.col + tb.b {
                let d2 = (r as f64 - cr as f64).powi(2) + (c as f64 - cc as f64).powi(2);
                img[(r, c)] += amplitude * (-d2 / s2).exp();
            }
        }
        truth.push(tb);
    }

    if spec.noise_std > 0.0 {
        let normal = Normal::new(0.0, spec.noise_std)
            .map_err(|e| Error::InvalidParameter(format!("noise_std: {e}")))?;
        img.mapv_inplace(|v| v + normal.sample(&mut rng));
    }
    Ok((img, truth))
}

/// Peak amplitude for the frame: explicit value if given, otherwise solved
/// from the requested SCR over the clean clutter statistics:
/// `SCR = (mean_box + A * mass - mean_nbhd) / std_nbhd` with `mass` the mean
/// unit-Gaussian value over the box, so `A = (scr * std - bias) / mass`.
fn resolve_amplitude(spec: &SceneSpec, clutter: &Image, tb: &TargetBox) -> Result<f64> {
    if let Some(a) = spec.target_amplitude {
        return Ok(a);
    }
    let scr = match spec.target_scr {
        Some(s) => s,
        None => return Ok(0.0),
    };
    let (inside, around) = split_regions(clutter, tb, SCR_NEIGHBORHOOD);
    let (mu_box, _) = mean_std(&inside);
    let (mu_ring, sigma_ring) = mean_std(&around);
    if sigma_ring == 0.0 {
        // Flat surroundings: any positive amplitude gives infinite SCR, so
        // treat the requested ratio as gray levels directly.
        return Ok(scr);
    }
    let (cr, cc) = spec.target_center();
    let s2 = 2.0 * spec.target_spread * spec.target_spread;
    let mut mass = 0.0;
    for r in tb.row..tb.row + tb.a {
        for c in tb.col..tb.col + tb.b {
            let d2 = (r as f64 - cr as f64).powi(2) + (c as f64 - cc as f64).powi(2);
            mass += (-d2 / s2).exp();
        }
    }
    mass /= (tb.a * tb.b) as f64;
    let amplitude = (scr * sigma_ring - (mu_box - mu_ring)) / mass;
    // If the box already exceeds the requested contrast, still plant a
    // minimal visible target rather than none.
    Ok(amplitude.max(1.0))
}
