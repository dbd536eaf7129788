//! Frame preprocessing: luma conversion and bilinear resize to the hash grid.

use crate::error::{Error, Result};

/// Side length of the square luma grid fed to the perceptual hash.
pub const HASH_GRID: usize = 32;

/// Interleaved 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::invalid(format!(
                "rgb buffer has {} bytes, expected {}x{}x3",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }
}

/// 32x32 luma matrix for one video frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    pixels: [[f64; HASH_GRID]; HASH_GRID],
    frame_index: usize,
}

impl GrayFrame {
    pub fn from_pixels(pixels: [[f64; HASH_GRID]; HASH_GRID], frame_index: usize) -> Result<Self> {
        for row in &pixels {
            for &v in row {
                if !v.is_finite() || !(0.0..=255.0).contains(&v) {
                    return Err(Error::invalid(format!("luma value {v} outside [0,255]")));
                }
            }
        }
        Ok(Self { pixels, frame_index })
    }

    /// Row-major access, `pixels()[row][col]`.
    pub fn pixels(&self) -> &[[f64; HASH_GRID]; HASH_GRID] {
        &self.pixels
    }

    pub fn frame_index(&self) -> usize {
        self.frame_index
    }
}

/// ITU-R 601 luma, computed on an integer numerator so flat gray stays exact.
fn luma([r, g, b]: [u8; 3]) -> f64 {
    (299 * r as u32 + 587 * g as u32 + 114 * b as u32) as f64 / 1000.0
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    a + (b - a) * w
}

/// Source sampling position and weight for one destination coordinate
/// (half-pixel centers, edge clamped).
fn source_coord(dst: usize, src_len: usize, dst_len: usize) -> (usize, usize, f64) {
    let scale = src_len as f64 / dst_len as f64;
    let pos = ((dst as f64 + 0.5) * scale - 0.5).max(0.0);
    let lo = (pos.floor() as usize).min(src_len - 1);
    let hi = (lo + 1).min(src_len - 1);
    (lo, hi, pos - lo as f64)
}

/// Convert to luma and bilinearly resize to 32x32.
pub fn preprocess_frame(image: &RgbImage, frame_index: usize) -> Result<GrayFrame> {
    if image.width == 0 || image.height == 0 {
        return Err(Error::invalid("empty image"));
    }
    let gray: Vec<f64> = image.data.chunks_exact(3).map(|p| luma([p[0], p[1], p[2]])).collect();
    let at = |x: usize, y: usize| gray[y * image.width + x];

    let mut pixels = [[0.0; HASH_GRID]; HASH_GRID];
    for (row, out_row) in pixels.iter_mut().enumerate() {
        let (y0, y1, wy) = source_coord(row, image.height, HASH_GRID);
        for (col, out) in out_row.iter_mut().enumerate() {
            let (x0, x1, wx) = source_coord(col, image.width, HASH_GRID);
            let top = lerp(at(x0, y0), at(x1, y0), wx);
            let bottom = lerp(at(x0, y1), at(x1, y1), wx);
            *out = lerp(top, bottom, wy).clamp(0.0, 255.0);
        }
    }
    Ok(GrayFrame { pixels, frame_index })
}
