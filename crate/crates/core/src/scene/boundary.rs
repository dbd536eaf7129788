//! Boundary detection on consecutive hash distances and adaptive threshold
//! selection from the scene-count curve.

use serde::{Deserialize, Serialize};

use super::phash::{hamming_norm, PHash};
use super::segmentation::SceneSegmentation;
use crate::error::{Error, Result};

/// Candidate thresholds `{tau_min, tau_min + step, ..., tau_max}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct ThresholdGrid {
    tau_min: f64,
    tau_max: f64,
    delta_tau: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    tau_min: f64,
    tau_max: f64,
    delta_tau: f64,
}

impl TryFrom<RawGrid> for ThresholdGrid {
    type Error = Error;
    fn try_from(r: RawGrid) -> Result<Self> {
        ThresholdGrid::new(r.tau_min, r.tau_max, r.delta_tau)
    }
}

impl From<ThresholdGrid> for RawGrid {
    fn from(g: ThresholdGrid) -> Self {
        RawGrid {
            tau_min: g.tau_min,
            tau_max: g.tau_max,
            delta_tau: g.delta_tau,
        }
    }
}

const GRID_EPS: f64 = 1e-9;

impl ThresholdGrid {
    pub fn new(tau_min: f64, tau_max: f64, delta_tau: f64) -> Result<Self> {
        let in_unit = |t: f64| t > 0.0 && t < 1.0;
        if !in_unit(tau_min) || !in_unit(tau_max) || tau_min >= tau_max {
            return Err(Error::invalid(format!(
                "threshold grid needs 0 < tau_min < tau_max < 1, got [{tau_min}, {tau_max}]"
            )));
        }
        if !(delta_tau > 0.0) || !delta_tau.is_finite() {
            return Err(Error::invalid(format!("grid step must be positive, got {delta_tau}")));
        }
        let grid = Self {
            tau_min,
            tau_max,
            delta_tau,
        };
        if grid.points().len() < 3 {
            return Err(Error::invalid("threshold grid needs at least 3 points"));
        }
        Ok(grid)
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.tau_max - self.tau_min) / self.delta_tau + GRID_EPS).floor() as usize + 1;
        (0..n).map(|i| self.tau_min + i as f64 * self.delta_tau).collect()
    }

    pub fn delta_tau(&self) -> f64 {
        self.delta_tau
    }
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        Self {
            tau_min: 0.05,
            tau_max: 0.60,
            delta_tau: 0.05,
        }
    }
}

/// Normalized Hamming distance between each pair of consecutive hashes.
pub fn consecutive_distances(hashes: &[PHash]) -> Vec<f64> {
    hashes.windows(2).map(|w| hamming_norm(w[0], w[1])).collect()
}

fn boundaries_from_distances(distances: &[f64], tau: f64) -> Vec<usize> {
    distances
        .iter()
        .enumerate()
        .filter(|(_, &d)| d >= tau)
        .map(|(t, _)| t)
        .collect()
}

/// Indices `t` where the change from frame `t` to `t + 1` reaches `tau`.
pub fn detect_boundaries(hashes: &[PHash], tau: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("tau {tau} outside [0,1]")));
    }
    Ok(boundaries_from_distances(&consecutive_distances(hashes), tau))
}

/// Pick the grid point just before the steepest drop of the scene-count curve.
///
/// `counts[i]` is the scene count at `taus[i]`. Ties go to the smallest tau.
pub fn select_threshold_from_counts(taus: &[f64], counts: &[usize], delta_tau: f64) -> Result<f64> {
    if taus.len() < 2 || taus.len() != counts.len() {
        return Err(Error::invalid(format!(
            "need at least 2 grid points with matching counts, got {} taus and {} counts",
            taus.len(),
            counts.len()
        )));
    }
    let mut best = 0;
    let mut best_drop = f64::NEG_INFINITY;
    for i in 0..taus.len() - 1 {
        let slope = (counts[i + 1] as f64 - counts[i] as f64) / delta_tau;
        if -slope > best_drop {
            best_drop = -slope;
            best = i;
        }
    }
    Ok(taus[best])
}

/// Scene count `N(tau)` at each grid point.
pub fn scene_count_curve(hashes: &[PHash], grid: &ThresholdGrid) -> (Vec<f64>, Vec<usize>) {
    let distances = consecutive_distances(hashes);
    let taus = grid.points();
    let counts = taus
        .iter()
        .map(|&tau| 1 + distances.iter().filter(|&&d| d >= tau).count())
        .collect();
    (taus, counts)
}

pub fn select_threshold(hashes: &[PHash], grid: &ThresholdGrid) -> Result<f64> {
    let (taus, counts) = scene_count_curve(hashes, grid);
    select_threshold_from_counts(&taus, &counts, grid.delta_tau())
}

/// Outcome of adaptive segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentOutcome {
    pub threshold: f64,
    pub segmentation: SceneSegmentation,
}

/// Adaptive threshold selection followed by boundary detection at that threshold.
pub fn segment(hashes: &[PHash], grid: &ThresholdGrid) -> Result<SegmentOutcome> {
    if hashes.is_empty() {
        return Err(Error::invalid("cannot segment a video with no frames"));
    }
    let threshold = select_threshold(hashes, grid)?;
    let boundaries = detect_boundaries(hashes, threshold)?;
    let segmentation = SceneSegmentation::from_boundaries(&boundaries, hashes.len())?;
    Ok(SegmentOutcome {
        threshold,
        segmentation,
    })
}
