//! Grayscale image raster and file codecs.
//!
//! Inputs: binary PGM (`P5`, 8-bit or 16-bit big-endian samples, decoded
//! bit-exactly by a hand-rolled codec) and grayscale PNG (8/16-bit, via the
//! `image` crate). Multi-channel inputs are rejected rather than silently
//! converted. Outputs are PGM only: 8-bit for masks/visualizations, 16-bit
//! big-endian for full-range component images.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Grayscale raster indexed `(row, col)`; values are raw sample values as
/// read from disk (`0..=maxval`), kept as `f64`.
pub type Image = Array2<f64>;

// ===== PGM (P5) =====

/// Incremental token reader for the PGM header (handles `#` comments).
struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        HeaderReader { bytes, pos: 0 }
    }

    /// Skips whitespace and comments, then reads one ASCII token.
    fn token(&mut self) -> Result<&'a [u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::malformed("PGM header", "unexpected end of header"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::malformed("PGM header", "expected a decimal number"))
    }

    /// Consumes the single whitespace byte that separates header and raster.
    fn raster(&mut self) -> Result<&'a [u8]> {
        if self.pos >= self.bytes.len() || !self.bytes[self.pos].is_ascii_whitespace() {
            return Err(Error::malformed(
                "PGM header",
                "missing whitespace before raster",
            ));
        }
        self.pos += 1;
        Ok(&self.bytes[self.pos..])
    }
}

/// Decodes a binary (`P5`) PGM. 8-bit for maxval <= 255, otherwise 16-bit
/// big-endian samples. Decoding is bit-exact: the returned values are the
/// raw integer samples.
pub fn decode_pgm(bytes: &[u8]) -> Result<Image> {
    let mut header = HeaderReader::new(bytes);
    let magic = header.token()?;
    if magic != b"P5" {
        return Err(Error::malformed(
            "PGM header",
            "only binary PGM (magic P5) is supported",
        ));
    }
    let width = header.number()?;
    let height = header.number()?;
    let maxval = header.number()?;
    if width == 0 || height == 0 {
        return Err(Error::malformed("PGM header", "zero width or height"));
    }
    if maxval == 0 || maxval > 65_535 {
        return Err(Error::malformed("PGM header", "maxval must be in 1..=65535"));
    }
    let raster = header.raster()?;
    let n = width * height;
    if maxval <= 255 {
        if raster.len() < n {
            return Err(Error::malformed("PGM raster", "truncated 8-bit raster"));
        }
        Ok(Image::from_shape_fn((height, width), |(r, c)| {
            raster[r * width + c] as f64
        }))
    } else {
        if raster.len() < 2 * n {
            return Err(Error::malformed("PGM raster", "truncated 16-bit raster"));
        }
        Ok(Image::from_shape_fn((height, width), |(r, c)| {
            let i = 2 * (r * width + c);
            u16::from_be_bytes([raster[i], raster[i + 1]]) as f64
        }))
    }
}

/// Encodes an 8-bit binary PGM (maxval 255).
pub fn encode_pgm8(data: &Array2<u8>) -> Vec<u8> {
    let (h, w) = data.dim();
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend(data.iter().copied());
    out
}

/// Encodes a 16-bit binary PGM (maxval 65535, big-endian samples).
pub fn encode_pgm16(data: &Array2<u16>) -> Vec<u8> {
    let (h, w) = data.dim();
    let mut out = format!("P5\n{w} {h}\n65535\n").into_bytes();
    for &v in data.iter() {
        out.extend(v.to_be_bytes());
    }
    out
}

/// Writes an 8-bit PGM file.
pub fn write_pgm8(path: &Path, data: &Array2<u8>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_pgm8(data))?;
    Ok(())
}

/// Writes a 16-bit PGM file.
pub fn write_pgm16(path: &Path, data: &Array2<u16>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_pgm16(data))?;
    Ok(())
}

// ===== Generic reader =====

/// Reads a grayscale image (PGM or PNG, by magic bytes). Multi-channel
/// images are an error.
pub fn read_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        if bytes.starts_with(b"P2") {
            return Err(Error::malformed(
                "PGM header",
                "ASCII PGM (P2) is not supported, use binary P5",
            ));
        }
        return decode_pgm(&bytes);
    }
    let decoded = image::load_from_memory(&bytes)
        .map_err(|e| Error::malformed("image file", e.to_string()))?;
    match decoded {
        image::DynamicImage::ImageLuma8(img) => {
            let (w, h) = img.dimensions();
            Ok(Image::from_shape_fn((h as usize, w as usize), |(r, c)| {
                img.get_pixel(c as u32, r as u32).0[0] as f64
            }))
        }
        image::DynamicImage::ImageLuma16(img) => {
            let (w, h) = img.dimensions();
            Ok(Image::from_shape_fn((h as usize, w as usize), |(r, c)| {
                img.get_pixel(c as u32, r as u32).0[0] as f64
            }))
        }
        other => Err(Error::UnsupportedImage(format!(
            "expected single-channel grayscale, got {:?} with {} channels",
            other.color(),
            other.color().channel_count()
        ))),
    }
}

/// Rescales to the full `u16` range, returning the quantized raster and the
/// `(lo, hi)` of the raw data (recorded in a sidecar so values can be mapped
/// back). A constant image quantizes to all zeros.
pub fn rescale_u16(img: &Image) -> (Array2<u16>, f64, f64) {
    let lo = img.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = img.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return (Array2::zeros(img.dim()), lo, hi);
    }
    let scale = 65_535.0 / (hi - lo);
    let q = img.mapv(|v| ((v - lo) * scale).round().clamp(0.0, 65_535.0) as u16);
    (q, lo, hi)
}

/// Inverse of [`rescale_u16`] given the recorded `(lo, hi)`.
pub fn unscale_u16(data: &Image, lo: f64, hi: f64) -> Image {
    if !(hi > lo) {
        return Image::from_elem(data.dim(), lo);
    }
    let scale = (hi - lo) / 65_535.0;
    data.mapv(|q| lo + q * scale)
}
