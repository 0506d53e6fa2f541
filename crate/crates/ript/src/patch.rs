//! Sliding-window patch model: layout enumeration, image-to-tensor stacking
//! and the uniform-average reconstruction back to an image.
//!
//! Patch origins along an axis of length `M` with window `I` and step `S` are
//! `{0, S, 2S, ...}` up to `M - I`, plus the clipped final origin `M - I` if
//! the stride did not land on it. Origins are enumerated row-major (row
//! origin varies slowest), and patch `p` of the tensor holds the window
//! `rows [r0, r0+I) x cols [c0, c0+J)` of the image.
//!
//! Reconstruction averages every tensor entry that maps to a pixel. When all
//! contributions are bitwise identical (the case for any tensor produced by
//! [`image_to_tensor`]) the average is returned exactly, which makes the
//! round trip bit-exact; otherwise a compensated sum is used.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::image_io::Image;
use crate::tensor::Tensor3;

/// Enumerated sliding-window geometry for one image size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchLayout {
    /// Image size `(rows, cols)`.
    pub image_dims: (usize, usize),
    /// Window size `(I, J)`.
    pub patch: (usize, usize),
    /// Stride `(step_rows, step_cols)`.
    pub step: (usize, usize),
    /// Window origins along rows (ascending, clipped final origin included).
    pub row_origins: Vec<usize>,
    /// Window origins along columns (ascending, clipped final origin included).
    pub col_origins: Vec<usize>,
}

/// Origins `{0, S, 2S, ...}` within `[0, M - I]`, plus `M - I` if missing.
fn axis_origins(len: usize, window: usize, step: usize) -> Vec<usize> {
    let last = len - window;
    let mut origins: Vec<usize> = (0..).map(|k| k * step).take_while(|&o| o <= last).collect();
    if *origins.last().expect("origin 0 always present") != last {
        origins.push(last);
    }
    origins
}

impl PatchLayout {
    /// Builds the layout, validating `1 <= patch <= image` and
    /// `1 <= step <= patch` (larger steps would leave pixels uncovered).
    pub fn new(
        image_dims: (usize, usize),
        patch: (usize, usize),
        step: (usize, usize),
    ) -> Result<Self> {
        let (m, n) = image_dims;
        let (i, j) = patch;
        let (sr, sc) = step;
        if i == 0 || j == 0 || i > m || j > n {
            return Err(Error::InvalidParameter(format!(
                "patch {patch:?} must be within image {image_dims:?} and non-empty"
            )));
        }
        if sr == 0 || sc == 0 || sr > i || sc > j {
            return Err(Error::InvalidParameter(format!(
                "step {step:?} must be in [1, patch] = [1, {patch:?}] so every pixel is covered"
            )));
        }
        Ok(PatchLayout {
            image_dims,
            patch,
            step,
            row_origins: axis_origins(m, i, sr),
            col_origins: axis_origins(n, j, sc),
        })
    }

    /// Number of patches `P`.
    pub fn count(&self) -> usize {
        self.row_origins.len() * self.col_origins.len()
    }

    /// Origin `(r0, c0)` of patch `p` (row-major over origin grid).
    pub fn origin(&self, p: usize) -> (usize, usize) {
        let ncols = self.col_origins.len();
        (self.row_origins[p / ncols], self.col_origins[p % ncols])
    }

    /// Tensor dimensions `(I, J, P)` produced by [`image_to_tensor`].
    pub fn tensor_dims(&self) -> (usize, usize, usize) {
        (self.patch.0, self.patch.1, self.count())
    }

    /// Per-pixel patch coverage counts (every pixel is covered at least once).
    pub fn coverage(&self) -> Array2<u32> {
        let mut cov = Array2::<u32>::zeros(self.image_dims);
        for &r0 in &self.row_origins {
            for &c0 in &self.col_origins {
                let mut window = cov.slice_mut(ndarray::s![
                    r0..r0 + self.patch.0,
                    c0..c0 + self.patch.1
                ]);
                window.mapv_inplace(|x| x + 1);
            }
        }
        cov
    }
}

/// Stacks sliding windows of `img` into an `(I, J, P)` tensor.
pub fn image_to_tensor(img: &Image, layout: &PatchLayout) -> Result<Tensor3> {
    if img.dim() != layout.image_dims {
        return Err(Error::ShapeMismatch(format!(
            "image is {:?} but layout was built for {:?}",
            img.dim(),
            layout.image_dims
        )));
    }
    let (i, j, p) = layout.tensor_dims();
    let mut t = Tensor3::zeros((i, j, p));
    for patch_idx in 0..p {
        let (r0, c0) = layout.origin(patch_idx);
        let window = img.slice(ndarray::s![r0..r0 + i, c0..c0 + j]);
        t.slice_mut(ndarray::s![.., .., patch_idx]).assign(&window);
    }
    Ok(t)
}

/// Per-pixel accumulator for the uniform-average reconstruction.
///
/// Mean of bitwise-equal contributions is returned exactly; mixed
/// contributions fall back to a Neumaier-compensated sum divided by the
/// count.
#[derive(Clone, Copy)]
struct PixelAcc {
    first: f64,
    all_equal: bool,
    sum: f64,
    comp: f64,
    count: u32,
}

impl PixelAcc {
    const EMPTY: PixelAcc = PixelAcc {
        first: 0.0,
        all_equal: true,
        sum: 0.0,
        comp: 0.0,
        count: 0,
    };

    #[inline]
    fn push(&mut self, x: f64) {
        if self.count == 0 {
            self.first = x;
        } else if self.all_equal && x.to_bits() != self.first.to_bits() {
            self.all_equal = false;
        }
        let t = self.sum + x;
        self.comp += if self.sum.abs() >= x.abs() {
            (self.sum - t) + x
        } else {
            (x - t) + self.sum
        };
        self.sum = t;
        self.count += 1;
    }

    #[inline]
    fn mean(&self) -> f64 {
        if self.all_equal {
            self.first
        } else {
            (self.sum + self.comp) / self.count as f64
        }
    }
}

/// Uniform-average reconstruction: every pixel is the mean of all tensor
/// entries that cover it. Exact inverse of [`image_to_tensor`].
pub fn tensor_to_image(t: &Tensor3, layout: &PatchLayout) -> Result<Image> {
    if t.dim() != layout.tensor_dims() {
        return Err(Error::ShapeMismatch(format!(
            "tensor is {:?} but layout produces {:?}",
            t.dim(),
            layout.tensor_dims()
        )));
    }
    let (m, n) = layout.image_dims;
    let (i, j, _) = layout.tensor_dims();
    let mut acc = vec![PixelAcc::EMPTY; m * n];
    for patch_idx in 0..layout.count() {
        let (r0, c0) = layout.origin(patch_idx);
        let slab = t.slice(ndarray::s![.., .., patch_idx]);
        for a in 0..i {
            for b in 0..j {
                acc[(r0 + a) * n + (c0 + b)].push(slab[(a, b)]);
            }
        }
    }
    Ok(Image::from_shape_fn((m, n), |(r, c)| acc[r * n + c].mean()))
}
