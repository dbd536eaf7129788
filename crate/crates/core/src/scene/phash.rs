//! DCT perceptual hash and normalized Hamming distance.
//!
//! The hash follows the common `phash` construction: a type-II DCT of the
//! 32x32 luma grid, the top-left 8x8 coefficient block (DC included), and one
//! bit per coefficient set when it is strictly above the block median.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::frame::{GrayFrame, HASH_GRID};

/// Side of the low-frequency block kept from the DCT.
pub const LOW_FREQ: usize = 8;
/// Hash length in bits.
pub const HASH_BITS: u32 = (LOW_FREQ * LOW_FREQ) as u32;

/// Coefficients closer to zero than this are floating-point residue of exact
/// zeros (e.g. every AC term of a flat frame) and are snapped to 0.
const ZERO_SNAP: f64 = 1e-6;

/// 64-bit perceptual hash; bit `m` corresponds to coefficient `(m / 8, m % 8)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PHash(pub u64);

impl PHash {
    pub fn bit(&self, m: u32) -> bool {
        self.0 >> m & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.0.count_ones()
    }
}

impl fmt::Debug for PHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PHash({:016x})", self.0)
    }
}

impl fmt::Display for PHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

fn cosine_table() -> [[f64; HASH_GRID]; LOW_FREQ] {
    let n = HASH_GRID as f64;
    let mut table = [[0.0; HASH_GRID]; LOW_FREQ];
    for (k, row) in table.iter_mut().enumerate() {
        for (i, c) in row.iter_mut().enumerate() {
            *c = (PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos();
        }
    }
    table
}

/// Low-frequency 8x8 block of the unnormalized 2D DCT-II
/// (`y_k = 2 * sum_n x_n cos(pi k (2n+1) / 2N)` along each axis).
pub fn dct_low_block(frame: &GrayFrame) -> [[f64; LOW_FREQ]; LOW_FREQ] {
    let cos = cosine_table();
    let px = frame.pixels();

    // Transform along columns first (rows of the output), only the 8 lowest.
    let mut partial = [[0.0; HASH_GRID]; LOW_FREQ];
    for (u, out_row) in partial.iter_mut().enumerate() {
        for (x, out) in out_row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (y, row) in px.iter().enumerate() {
                acc += row[x] * cos[u][y];
            }
            *out = 2.0 * acc;
        }
    }

    let mut block = [[0.0; LOW_FREQ]; LOW_FREQ];
    for (u, out_row) in block.iter_mut().enumerate() {
        for (v, out) in out_row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for x in 0..HASH_GRID {
                acc += partial[u][x] * cos[v][x];
            }
            let c = 2.0 * acc;
            *out = if c.abs() < ZERO_SNAP { 0.0 } else { c };
        }
    }
    block
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn phash(frame: &GrayFrame) -> PHash {
    let block = dct_low_block(frame);
    let flat: Vec<f64> = block.iter().flatten().copied().collect();
    let med = median(&mut flat.clone());
    let bits = flat
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > med)
        .fold(0u64, |acc, (m, _)| acc | 1 << m);
    PHash(bits)
}

/// Fraction of differing bits, in `[0, 1]`.
pub fn hamming_norm(a: PHash, b: PHash) -> f64 {
    (a.0 ^ b.0).count_ones() as f64 / HASH_BITS as f64
}
