//! Small synthetic datasets with known scene boundaries, for tests and demos.
//!
//! Each block is a static two-colour cell pattern. Consecutive blocks are
//! drawn until their hash distance clears `MIN_BLOCK_DISTANCE`, so every
//! block change is a hard cut.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::embeddings::write_embeddings;
use crate::io::frames::write_png;
use crate::io::manifest::{Annotation, DatasetManifest, DatasetTag, VideoEntry};
use crate::io::record::write_json;
use crate::scene::{hamming_norm, phash, preprocess_frame, FrameEmbeddings, PHash, RgbImage};

pub const MIN_BLOCK_DISTANCE: f64 = 0.65;
const IMAGE_SIZE: usize = 64;
const CELLS: usize = 4;
const EMBED_DIM: usize = 8;

#[derive(Debug, Clone)]
pub struct SyntheticVideo {
    pub id: String,
    pub fps: f64,
    pub block_lengths: Vec<usize>,
    /// One image per block; every frame of the block repeats it.
    pub block_images: Vec<RgbImage>,
    pub embeddings: FrameEmbeddings,
    pub annotations: Vec<Vec<f64>>,
}

impl SyntheticVideo {
    pub fn n_frames(&self) -> usize {
        self.block_lengths.iter().sum()
    }

    /// Frame `t` such that a cut lies between `t` and `t + 1`.
    pub fn true_boundaries(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut end = 0;
        for l in &self.block_lengths[..self.block_lengths.len() - 1] {
            end += l;
            out.push(end - 1);
        }
        out
    }

    pub fn frames(&self) -> Vec<RgbImage> {
        self.block_lengths
            .iter()
            .zip(&self.block_images)
            .flat_map(|(&l, img)| std::iter::repeat_n(img.clone(), l))
            .collect()
    }
}

fn pattern(rng: &mut ChaCha8Rng) -> RgbImage {
    let a: [u8; 3] = rng.gen();
    let mut b: [u8; 3] = rng.gen();
    // Keep the two colours far apart in brightness.
    let luma = |c: [u8; 3]| 299 * c[0] as u32 + 587 * c[1] as u32 + 114 * c[2] as u32;
    if luma(a).abs_diff(luma(b)) < 60_000 {
        b = [255 - a[0], 255 - a[1], 255 - a[2]];
    }
    let cells: Vec<bool> = (0..CELLS * CELLS).map(|_| rng.gen()).collect();
    let cell = IMAGE_SIZE / CELLS;
    RgbImage::from_fn(IMAGE_SIZE, IMAGE_SIZE, |x, y| {
        if cells[(y / cell) * CELLS + x / cell] {
            a
        } else {
            b
        }
    })
}

fn hash(img: &RgbImage) -> PHash {
    phash(&preprocess_frame(img, 0).expect("synthetic frames are non-empty"))
}

/// `n` block images whose consecutive hash distances are all at least
/// `MIN_BLOCK_DISTANCE`.
pub fn block_patterns(n: usize, rng: &mut ChaCha8Rng) -> Vec<RgbImage> {
    let mut out: Vec<RgbImage> = Vec::with_capacity(n);
    let mut last: Option<PHash> = None;
    while out.len() < n {
        let img = pattern(rng);
        let h = hash(&img);
        if last.is_none_or(|p| hamming_norm(p, h) >= MIN_BLOCK_DISTANCE) {
            last = Some(h);
            out.push(img);
        }
    }
    out
}

/// Video with the given block lengths; embeddings cluster by block and the
/// annotations follow a per-block importance with per-user jitter.
pub fn synth_video(id: &str, block_lengths: &[usize], fps: f64, users: usize, seed: u64) -> Result<SyntheticVideo> {
    if block_lengths.is_empty() || block_lengths.contains(&0) {
        return Err(Error::invalid("blocks must be non-empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block_images = block_patterns(block_lengths.len(), &mut rng);
    let importance: Vec<f64> = block_lengths.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut rows = Vec::new();
    for &len in block_lengths {
        let center: Vec<f32> = (0..EMBED_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..len {
            rows.push(
                center
                    .iter()
                    .map(|c| c + rng.gen_range(-0.05..0.05))
                    .collect::<Vec<f32>>(),
            );
        }
    }
    let embeddings = FrameEmbeddings::from_rows(&rows)?;
    let annotations = (0..users)
        .map(|_| {
            block_lengths
                .iter()
                .zip(&importance)
                .flat_map(|(&len, &imp)| {
                    let jitter = rng.gen_range(-0.1..0.1);
                    let v = ((imp + jitter).clamp(0.0, 1.0) * 1000.0).round() / 1000.0;
                    std::iter::repeat_n(v, len)
                })
                .collect()
        })
        .collect();
    Ok(SyntheticVideo {
        id: id.to_string(),
        fps,
        block_lengths: block_lengths.to_vec(),
        block_images,
        embeddings,
        annotations,
    })
}

/// Random block lengths in `[min_len, max_len]`.
pub fn random_blocks(rng: &mut ChaCha8Rng, n_blocks: usize, min_len: usize, max_len: usize) -> Vec<usize> {
    (0..n_blocks).map(|_| rng.gen_range(min_len..=max_len)).collect()
}

/// Standard demo dataset: `n_videos` videos of 6-8 blocks (150-220 frames)
/// at 30 fps, with one planted 60-frame block in the first video so that
/// refinement has work to do. Videos are long enough that some scenes fit
/// a 15% budget.
pub fn demo_videos(n_videos: usize, seed: u64) -> Result<Vec<SyntheticVideo>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_videos)
        .map(|i| {
            let n_blocks = rng.gen_range(6..=8);
            let mut blocks = random_blocks(&mut rng, n_blocks, 150, 220);
            if i == 0 {
                blocks.insert(1, 60);
            }
            synth_video(&format!("synth{i:02}"), &blocks, 30.0, 2, rng.gen())
        })
        .collect()
}

/// Write frames, embeddings and a manifest under `dir`; returns the manifest path.
pub fn write_dataset(dir: &Path, dataset: DatasetTag, videos: &[SyntheticVideo]) -> Result<PathBuf> {
    let mut entries = Vec::new();
    for v in videos {
        let frame_dir = dir.join("frames").join(&v.id);
        std::fs::create_dir_all(&frame_dir).map_err(|e| Error::io(&frame_dir, e))?;
        v.frames()
            .par_iter()
            .enumerate()
            .try_for_each(|(t, frame)| write_png(&frame_dir.join(format!("{t:06}.png")), frame))?;
        let emb_rel = PathBuf::from("embeddings").join(format!("{}.vsem", v.id));
        let emb_path = dir.join(&emb_rel);
        std::fs::create_dir_all(emb_path.parent().expect("has parent")).map_err(|e| Error::io(dir, e))?;
        write_embeddings(&emb_path, &v.embeddings)?;
        entries.push(VideoEntry {
            id: v.id.clone(),
            fps: v.fps,
            n_frames: v.n_frames(),
            annotations: v
                .annotations
                .iter()
                .enumerate()
                .map(|(u, scores)| Annotation {
                    user: format!("user{u}"),
                    scores: Some(scores.clone()),
                    ..Annotation::default()
                })
                .collect(),
            segments: None,
            frames: Some(PathBuf::from("frames").join(&v.id)),
            embeddings: Some(emb_rel),
            captions: None,
            preference: None,
        });
    }
    let manifest = DatasetManifest {
        dataset,
        videos: entries,
        base_dir: dir.to_path_buf(),
    };
    manifest.validate()?;
    let path = dir.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::manifest::load_manifest;
    use crate::scene::{hash_frames, segment, ThresholdGrid};

    #[test]
    fn blocks_are_hard_cuts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let imgs = block_patterns(6, &mut rng);
        for w in imgs.windows(2) {
            assert!(hamming_norm(hash(&w[0]), hash(&w[1])) >= MIN_BLOCK_DISTANCE);
        }
    }

    #[test]
    fn synthetic_boundaries_are_recovered() {
        let v = synth_video("v", &[150, 200, 170], 30.0, 1, 3).unwrap();
        let hashes = hash_frames(&v.frames()).unwrap();
        let out = segment(&hashes, &ThresholdGrid::default()).unwrap();
        assert_eq!(out.segmentation.boundaries(), v.true_boundaries());
    }

    #[test]
    fn dataset_writes_loadable_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let videos = vec![synth_video("a", &[5, 4], 2.0, 2, 1).unwrap()];
        let path = write_dataset(dir.path(), DatasetTag::Tvsum, &videos).unwrap();
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.videos[0].n_frames, 9);
        assert_eq!(m.videos[0].annotations.len(), 2);
    }
}
