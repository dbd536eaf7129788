//! Scene and video descriptions: one middle frame per second, batched through
//! a caption backend, with continuation phrasing normalized before stitching.

mod client;
mod text;

pub use client::{CaptionClient, FrameSource, HttpCaptionClient, MockCaptionClient, CAPTION_PROMPT};
pub use text::{normalize_batch_text, stitch};

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::backend::{ordered_parallel_map, RetryPolicy};
use crate::error::{BackendError, Error, Result};
use crate::io::cache::DiskCache;
use crate::scene::SceneSegmentation;

/// Sampled frames per caption batch unless configured otherwise.
pub const DEFAULT_BATCH_SIZE: usize = 60;

/// One frame index per whole second of video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSamplingPlan {
    pub fps: f64,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionBatch {
    pub batch_index: usize,
    pub frame_indices: Vec<usize>,
    pub text: String,
    pub is_first: bool,
    pub is_last: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneCaption {
    pub scene_index: usize,
    pub text: String,
}

/// Middle frame of every second `k` with `k * fps < n_frames`.
pub fn sample_middle_frames(fps: f64, n_frames: usize) -> Result<FrameSamplingPlan> {
    if !(fps > 0.0) || !fps.is_finite() {
        return Err(Error::invalid(format!("fps must be positive, got {fps}")));
    }
    if n_frames == 0 {
        return Err(Error::invalid("cannot sample an empty video"));
    }
    let mut indices: Vec<usize> = Vec::new();
    let mut k = 0usize;
    while (k as f64) * fps < n_frames as f64 {
        let idx = ((k as f64 * fps + fps / 2.0).floor() as usize).min(n_frames - 1);
        if indices.last() != Some(&idx) {
            indices.push(idx);
        }
        k += 1;
    }
    Ok(FrameSamplingPlan { fps, indices })
}

/// Consecutive chunks of at most `batch_size` sampled frames.
pub fn batch_frames(plan: &FrameSamplingPlan, batch_size: usize) -> Result<Vec<CaptionBatch>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let chunks: Vec<&[usize]> = plan.indices.chunks(batch_size).collect();
    let last = chunks.len().saturating_sub(1);
    Ok(chunks
        .into_iter()
        .enumerate()
        .map(|(i, c)| CaptionBatch {
            batch_index: i,
            frame_indices: c.to_vec(),
            text: String::new(),
            is_first: i == 0,
            is_last: i == last,
        })
        .collect())
}

/// Caption a frame range: sample, batch, call the backend per batch, stitch.
pub fn describe_range(
    client: &dyn CaptionClient,
    range: Range<usize>,
    fps: f64,
    batch_size: usize,
    retry: &RetryPolicy,
) -> Result<String> {
    let plan = sample_middle_frames(fps, range.len())?;
    let absolute = FrameSamplingPlan {
        fps,
        indices: plan.indices.iter().map(|i| i + range.start).collect(),
    };
    let mut batches = batch_frames(&absolute, batch_size)?;
    for batch in &mut batches {
        let (text, _) = retry
            .run(|_| {
                let t = client.describe(&batch.frame_indices, CAPTION_PROMPT)?;
                if t.trim().is_empty() {
                    Err(BackendError::Response("empty caption".into()))
                } else {
                    Ok(t)
                }
            })
            .map_err(|(e, _)| Error::Backend(e))?;
        batch.text = text;
    }
    stitch(&batches)
}

pub fn describe_scene(
    client: &dyn CaptionClient,
    scene_index: usize,
    scene: Range<usize>,
    fps: f64,
    batch_size: usize,
    retry: &RetryPolicy,
) -> Result<SceneCaption> {
    if scene.is_empty() {
        return Err(Error::invalid(format!("scene {scene_index} is empty")));
    }
    describe_range(client, scene, fps, batch_size, retry)
        .map(|text| SceneCaption { scene_index, text })
        .map_err(|e| Error::Caption {
            scene_index,
            source: Box::new(e),
        })
}

/// Captioning options shared by scene and global descriptions.
#[derive(Debug, Clone)]
pub struct CaptionOptions {
    pub fps: f64,
    pub batch_size: usize,
    pub retry: RetryPolicy,
    pub concurrency: usize,
}

/// Caption every scene with bounded concurrency; results are in scene order.
/// Cached entries are keyed by (video id, scene interval, backend id).
pub fn caption_scenes(
    client: &dyn CaptionClient,
    video_id: &str,
    seg: &SceneSegmentation,
    opts: &CaptionOptions,
    cache: Option<&DiskCache>,
) -> Result<Vec<SceneCaption>> {
    let backend = client.backend_id();
    let intervals = seg.intervals().to_vec();
    let results = ordered_parallel_map(&intervals, opts.concurrency, |i, &(s, e)| {
        let key = [
            video_id.to_string(),
            format!("{s}-{e}"),
            backend.clone(),
            opts.batch_size.to_string(),
        ];
        if let Some(text) = cache.and_then(|c| c.get("captions", &key)) {
            return Ok(SceneCaption { scene_index: i, text });
        }
        let cap = describe_scene(client, i, s..e, opts.fps, opts.batch_size, &opts.retry)?;
        if let Some(c) = cache {
            c.put("captions", &key, &cap.text)?;
        }
        Ok(cap)
    });
    results.into_iter().collect()
}

/// Holistic description of the full video.
pub fn caption_video(
    client: &dyn CaptionClient,
    video_id: &str,
    n_frames: usize,
    opts: &CaptionOptions,
    cache: Option<&DiskCache>,
) -> Result<String> {
    let key = [
        video_id.to_string(),
        format!("global-0-{n_frames}"),
        client.backend_id(),
        opts.batch_size.to_string(),
    ];
    if let Some(text) = cache.and_then(|c| c.get("captions", &key)) {
        return Ok(text);
    }
    let text = describe_range(client, 0..n_frames, opts.fps, opts.batch_size, &opts.retry)?;
    if let Some(c) = cache {
        c.put("captions", &key, &text)?;
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn sampling_examples() {
        assert_eq!(sample_middle_frames(30.0, 90).unwrap().indices, vec![15, 45, 75]);
        assert_eq!(sample_middle_frames(1.0, 3).unwrap().indices, vec![0, 1, 2]);
        assert_eq!(sample_middle_frames(30.0, 10).unwrap().indices, vec![9]);
        assert!(sample_middle_frames(0.0, 10).is_err());
    }

    #[test]
    fn sampling_handles_fractional_and_slow_rates() {
        let plan = sample_middle_frames(29.97, 100).unwrap();
        assert_eq!(plan.indices, vec![14, 44, 74, 99]);
        let slow = sample_middle_frames(0.5, 4).unwrap();
        assert_eq!(slow.indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn batching_examples() {
        let plan = |n: usize| FrameSamplingPlan {
            fps: 1.0,
            indices: (0..n).collect(),
        };
        let sizes: Vec<usize> = batch_frames(&plan(5), 2)
            .unwrap()
            .iter()
            .map(|b| b.frame_indices.len())
            .collect();
        assert_eq!(sizes, vec![2, 2, 1]);

        let one = batch_frames(&plan(2), 10).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].is_first && one[0].is_last);

        let two = batch_frames(&plan(6), 3).unwrap();
        assert_eq!(two.len(), 2);
        assert!(two[0].is_first && !two[0].is_last);
        assert!(!two[1].is_first && two[1].is_last);
        assert!(batch_frames(&plan(3), 0).is_err());
    }

    struct Echo(AtomicUsize);

    impl CaptionClient for Echo {
        fn backend_id(&self) -> String {
            "echo".into()
        }
        fn describe(&self, _frames: &[usize], _prompt: &str) -> Result<String, BackendError> {
            Ok(format!("batch {}", self.0.fetch_add(1, Ordering::SeqCst)))
        }
    }

    struct Broken;

    impl CaptionClient for Broken {
        fn backend_id(&self) -> String {
            "broken".into()
        }
        fn describe(&self, _frames: &[usize], _prompt: &str) -> Result<String, BackendError> {
            Err(BackendError::Transport("connection refused".into()))
        }
    }

    #[test]
    fn describe_scene_stitches_with_continuations() {
        let client = Echo(AtomicUsize::new(0));
        // 5 seconds at 2 fps -> 5 sampled frames -> batches of 2 -> 3 batches.
        let cap = describe_scene(&client, 4, 0..10, 2.0, 2, &RetryPolicy::immediate(3)).unwrap();
        assert_eq!(cap.scene_index, 4);
        assert_eq!(
            cap.text,
            "batch 0 The video continues. batch 1 The video continues. batch 2"
        );
    }

    #[test]
    fn single_batch_scene_is_not_rewritten() {
        struct Fixed;
        impl CaptionClient for Fixed {
            fn backend_id(&self) -> String {
                "fixed".into()
            }
            fn describe(&self, _: &[usize], _: &str) -> Result<String, BackendError> {
                Ok("The video begins with a dog. The video ends.".into())
            }
        }
        let cap = describe_scene(&Fixed, 0, 0..30, 30.0, 60, &RetryPolicy::immediate(1)).unwrap();
        assert_eq!(cap.text, "The video begins with a dog. The video ends.");
    }

    #[test]
    fn permanent_failure_names_scene() {
        let err = describe_scene(&Broken, 7, 0..30, 30.0, 60, &RetryPolicy::immediate(3)).unwrap_err();
        assert!(matches!(err, Error::Caption { scene_index: 7, .. }));
        assert!(err.is_backend());
    }

    #[test]
    fn scenes_are_captioned_in_order() {
        let client = MockCaptionClient::new(3);
        let seg = SceneSegmentation::from_lengths(&[90, 60, 120]).unwrap();
        let opts = CaptionOptions {
            fps: 30.0,
            batch_size: 2,
            retry: RetryPolicy::immediate(1),
            concurrency: 3,
        };
        let caps = caption_scenes(&client, "v", &seg, &opts, None).unwrap();
        let serial: Vec<SceneCaption> = seg
            .ranges()
            .enumerate()
            .map(|(i, r)| describe_scene(&client, i, r, 30.0, 2, &opts.retry).unwrap())
            .collect();
        assert_eq!(caps, serial);
    }
}
