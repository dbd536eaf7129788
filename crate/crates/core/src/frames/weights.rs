//! Within-scene frame weights from cluster consistency and embedding spread.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cluster::{elbow_k, kmeans_path};
use crate::error::{Error, Result};
use crate::scene::{FrameEmbeddings, SceneSegmentation};

/// Videos at most this long (seconds) count as short.
pub const DEFAULT_SHORT_SECONDS: f64 = 100.0;
const MAX_ELBOW_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSchedule {
    pub sigma: f64,
    pub window_seconds: f64,
}

/// Long videos lean on uniqueness, mid-length ones on consistency, short
/// ones mix both over wider windows.
pub fn schedule(duration_seconds: f64, short_seconds: f64) -> Result<WeightSchedule> {
    if !(duration_seconds > 0.0) || !(short_seconds > 0.0) {
        return Err(Error::invalid(format!(
            "durations must be positive (T={duration_seconds}, S={short_seconds})"
        )));
    }
    let (sigma, window_seconds) = if duration_seconds > 5.0 * short_seconds {
        (0.1, 1.0)
    } else if duration_seconds > short_seconds {
        (1.0, 1.0)
    } else {
        (0.3, 3.0)
    };
    Ok(WeightSchedule { sigma, window_seconds })
}

/// Fraction of the window carrying its most common label.
pub fn consistency(labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let mut sorted = labels.to_vec();
    sorted.sort_unstable();
    let modal = sorted.chunk_by(|a, b| a == b).map(<[usize]>::len).max().unwrap_or(0);
    modal as f64 / labels.len() as f64
}

/// Mean Euclidean distance of each row to the window mean.
pub fn uniqueness(rows: &[Vec<f64>]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let n = rows.len() as f64;
    let dim = rows[0].len();
    // Shifted by the first row: exact for constant columns, and better conditioned.
    let mean: Vec<f64> = (0..dim)
        .map(|j| rows[0][j] + rows.iter().map(|r| r[j] - rows[0][j]).sum::<f64>() / n)
        .collect();
    rows.iter()
        .map(|r| r.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .sum::<f64>()
        / n
}

pub fn segment_weight(c: f64, u: f64, sigma: f64) -> f64 {
    sigma * c + (1.0 - sigma) * u
}

fn scene_weights(rows: &[Vec<f64>], window: usize, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if rows.len() < 3 {
        return Ok(vec![1.0; rows.len()]);
    }
    let path = kmeans_path(rows, MAX_ELBOW_K.min(rows.len()), seed)?;
    let wcss: Vec<f64> = path.iter().map(|m| m.wcss).collect();
    let labels = &path[elbow_k(&wcss) - 1].labels;
    let mut out = Vec::with_capacity(rows.len());
    for (lab, win) in labels.chunks(window).zip(rows.chunks(window)) {
        let w = segment_weight(consistency(lab), uniqueness(win), sigma);
        out.extend(std::iter::repeat_n(w, lab.len()));
    }
    Ok(out)
}

/// Per-frame weights. Each scene is clustered with K from the elbow rule,
/// then cut into windows of `round(W * fps)` frames sharing one weight.
/// Scenes shorter than 3 frames get weight 1.
pub fn frame_weights(
    emb: &FrameEmbeddings,
    seg: &SceneSegmentation,
    fps: f64,
    sched: &WeightSchedule,
    seed: u64,
) -> Result<Vec<f64>> {
    if emb.n_frames() != seg.n_frames() {
        return Err(Error::invalid(format!(
            "{} embedding rows for {} frames",
            emb.n_frames(),
            seg.n_frames()
        )));
    }
    if !(fps > 0.0) || !(sched.window_seconds > 0.0) || !(0.0..=1.0).contains(&sched.sigma) {
        return Err(Error::invalid("invalid fps or weight schedule"));
    }
    let window = ((sched.window_seconds * fps).round() as usize).max(1);
    let per_scene: Vec<Vec<f64>> = seg
        .ranges()
        .collect::<Vec<_>>()
        .into_par_iter()
        .enumerate()
        .map(|(i, r)| scene_weights(&emb.rows_f64(r), window, sched.sigma, seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    Ok(per_scene.concat())
}
