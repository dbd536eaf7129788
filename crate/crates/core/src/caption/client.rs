use std::sync::Arc;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::backend::{post_json, seeded_u64};
use crate::error::BackendError;

/// Fixed instruction sent with every frame batch.
pub const CAPTION_PROMPT: &str = "Describe this video in detail";

/// A video-language backend that describes an ordered batch of frames.
pub trait CaptionClient: Send + Sync {
    /// Stable identifier used in cache keys.
    fn backend_id(&self) -> String;

    fn describe(&self, frame_indices: &[usize], prompt: &str) -> Result<String, BackendError>;
}

/// Source of encoded frames for remote captioning.
pub trait FrameSource: Send + Sync {
    fn jpeg(&self, frame_index: usize) -> Result<Vec<u8>, BackendError>;
}

const SUBJECTS: [&str; 8] = [
    "a person",
    "two people",
    "a dog",
    "a cyclist",
    "a cook",
    "a crowd",
    "a mechanic",
    "a child",
];
const ACTIONS: [&str; 8] = [
    "walking slowly",
    "preparing food",
    "repairing a tire",
    "waving at the camera",
    "riding along a road",
    "standing still",
    "playing with a ball",
    "talking",
];
const PLACES: [&str; 6] = [
    "in a kitchen",
    "on a street",
    "in a park",
    "inside a garage",
    "near a river",
    "in front of a building",
];

/// Offline caption backend: deterministic text per (seed, frame batch).
///
/// Each sampled frame contributes a phrase chosen from its own index, so
/// scenes covering different frames read differently.
#[derive(Debug, Clone)]
pub struct MockCaptionClient {
    seed: u64,
}

impl MockCaptionClient {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn phrase(&self, frame: usize) -> String {
        // Neighbouring seconds share a phrase so captions are not pure noise.
        let bucket = (frame / 150) as u64;
        let h = seeded_u64(self.seed, &bucket.to_le_bytes());
        format!(
            "{} {} {}",
            SUBJECTS[(h % 8) as usize],
            ACTIONS[(h >> 8) as usize % 8],
            PLACES[(h >> 16) as usize % 6]
        )
    }
}

impl CaptionClient for MockCaptionClient {
    fn backend_id(&self) -> String {
        format!("mock-seed-{}", self.seed)
    }

    fn describe(&self, frame_indices: &[usize], _prompt: &str) -> Result<String, BackendError> {
        let mut phrases: Vec<String> = frame_indices.iter().map(|&f| self.phrase(f)).collect();
        phrases.dedup();
        let mut text = format!("The video begins with {}.", phrases[0]);
        for p in &phrases[1..] {
            text.push_str(&format!(" Then {p}."));
        }
        let last = *frame_indices.last().unwrap_or(&0) as u64;
        if seeded_u64(self.seed ^ 0xE17D, &last.to_le_bytes()).is_multiple_of(2) {
            text.push_str(" The video ends.");
        }
        Ok(text)
    }
}

#[derive(Serialize)]
struct CaptionRequest<'a> {
    frames: Vec<String>,
    prompt: &'a str,
}

#[derive(Deserialize)]
struct CaptionResponse {
    text: String,
}

/// JSON-over-HTTP caption backend: `{frames: [base64 JPEG], prompt}` -> `{text}`.
pub struct HttpCaptionClient {
    endpoint: String,
    api_key: Option<String>,
    frames: Arc<dyn FrameSource>,
    timeout: Duration,
}

impl HttpCaptionClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, frames: Arc<dyn FrameSource>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key,
            frames,
            timeout: Duration::from_secs(300),
        }
    }
}

impl CaptionClient for HttpCaptionClient {
    fn backend_id(&self) -> String {
        format!("http:{}", self.endpoint)
    }

    fn describe(&self, frame_indices: &[usize], prompt: &str) -> Result<String, BackendError> {
        let frames = frame_indices
            .iter()
            .map(|&i| {
                self.frames
                    .jpeg(i)
                    .map(|b| base64::engine::general_purpose::STANDARD.encode(b))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let resp: CaptionResponse = post_json(
            &self.endpoint,
            self.api_key.as_deref(),
            &CaptionRequest { frames, prompt },
            self.timeout,
        )?;
        Ok(resp.text)
    }
}
