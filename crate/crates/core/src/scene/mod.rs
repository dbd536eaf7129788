//! Scene division: perceptual hashing, adaptive-threshold boundary detection
//! and short-scene refinement.

mod boundary;
mod embeddings;
mod frame;
mod phash;
mod refine;
mod segmentation;

pub use boundary::{
    consecutive_distances, detect_boundaries, scene_count_curve, segment, select_threshold,
    select_threshold_from_counts, SegmentOutcome, ThresholdGrid,
};
pub use embeddings::{cosine_similarity, FrameEmbeddings};
pub use frame::{preprocess_frame, GrayFrame, RgbImage, HASH_GRID};
pub use phash::{dct_low_block, hamming_norm, phash, PHash, HASH_BITS, LOW_FREQ};
pub use refine::{min_len_from_seconds, refine_short_scenes, DEFAULT_MIN_SCENE_FRAMES};
pub use segmentation::SceneSegmentation;

use rayon::prelude::*;

use crate::error::Result;

/// Preprocess and hash every frame; output order follows input order.
pub fn hash_frames(frames: &[RgbImage]) -> Result<Vec<PHash>> {
    frames
        .par_iter()
        .enumerate()
        .map(|(i, img)| preprocess_frame(img, i).map(|g| phash(&g)))
        .collect()
}
