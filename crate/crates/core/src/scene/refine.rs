//! Merge overly short scenes into their most similar neighbor.

use super::embeddings::{cosine_similarity, FrameEmbeddings};
use super::segmentation::SceneSegmentation;
use crate::error::{Error, Result};

/// Scenes shorter than this many frames are merged away.
pub const DEFAULT_MIN_SCENE_FRAMES: usize = 150;

/// Frame count for a minimum duration in seconds.
pub fn min_len_from_seconds(seconds: f64, fps: f64) -> usize {
    (seconds * fps).round().max(1.0) as usize
}

/// Cumulative embedding sums so any interval mean is O(dim).
struct PrefixSums {
    sums: Vec<f64>,
    dim: usize,
}

impl PrefixSums {
    fn new(emb: &FrameEmbeddings) -> Self {
        let dim = emb.dim();
        let mut sums = vec![0.0; (emb.n_frames() + 1) * dim];
        for t in 0..emb.n_frames() {
            for (k, &v) in emb.row(t).iter().enumerate() {
                sums[(t + 1) * dim + k] = sums[t * dim + k] + v as f64;
            }
        }
        Self { sums, dim }
    }

    fn mean(&self, (start, end): (usize, usize)) -> Vec<f64> {
        let n = (end - start) as f64;
        (0..self.dim)
            .map(|k| (self.sums[end * self.dim + k] - self.sums[start * self.dim + k]) / n)
            .collect()
    }
}

/// Repeatedly merge the leftmost interval shorter than `min_len` into the
/// neighbor whose mean embedding is more cosine-similar (ties go left).
pub fn refine_short_scenes(
    seg: &SceneSegmentation,
    emb: &FrameEmbeddings,
    min_len: usize,
) -> Result<SceneSegmentation> {
    if emb.n_frames() != seg.n_frames() {
        return Err(Error::invalid(format!(
            "embeddings cover {} frames but segmentation covers {}",
            emb.n_frames(),
            seg.n_frames()
        )));
    }
    let prefix = PrefixSums::new(emb);
    let mut intervals = seg.intervals().to_vec();

    while intervals.len() > 1 {
        let Some(i) = intervals.iter().position(|&(s, e)| e - s < min_len) else {
            break;
        };
        let merge_left = if i == 0 {
            false
        } else if i == intervals.len() - 1 {
            true
        } else {
            let own = prefix.mean(intervals[i]);
            let prev = cosine_similarity(&own, &prefix.mean(intervals[i - 1]));
            let next = cosine_similarity(&own, &prefix.mean(intervals[i + 1]));
            prev >= next
        };
        let (s, e) = intervals.remove(i);
        if merge_left {
            intervals[i - 1].1 = e;
        } else {
            intervals[i].0 = s;
        }
    }
    SceneSegmentation::new(intervals, seg.n_frames())
}
