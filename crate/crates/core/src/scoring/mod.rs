//! Rubric-guided scene scoring through a pluggable LLM client.

mod client;
mod mock;
mod prompt;

pub use client::{HttpLlmClient, LlmClient};
pub use mock::{mock_rubric_score, novelty_from_captions, MockLlmClient, MockSceneFeatures, Novelty};
pub use prompt::{build_boundary_prompt, build_context_prompt, build_prompt, parse_score, ScoringMode, ScoringRequest};

use serde::{Deserialize, Serialize};

use crate::backend::{content_hash, ordered_parallel_map, RetryPolicy};
use crate::caption::SceneCaption;
use crate::error::{Error, Result};
use crate::io::cache::DiskCache;
use crate::rubric::Rubric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneScore {
    pub scene_index: usize,
    pub value: u8,
    pub mode: ScoringMode,
    pub attempt_count: u32,
}

#[derive(Debug, Clone)]
pub struct ScoringOptions {
    pub temperature: f64,
    pub retry: RetryPolicy,
    pub concurrency: usize,
    /// When false every scene is scored target-only.
    pub contextual: bool,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            retry: RetryPolicy::default(),
            concurrency: 4,
            contextual: true,
        }
    }
}

/// Boundary for the first and last scene, Contextual in between.
pub fn scoring_mode(scene_index: usize, n_scenes: usize, contextual: bool) -> ScoringMode {
    if !contextual || scene_index == 0 || scene_index + 1 >= n_scenes {
        ScoringMode::Boundary
    } else {
        ScoringMode::Contextual
    }
}

#[derive(Serialize, Deserialize)]
struct CachedScore {
    value: u8,
    attempts: u32,
}

/// Score every scene. Results are ordered by scene index; a scene whose
/// responses stay malformed or whose backend keeps failing aborts the call.
pub fn score_scenes(
    client: &dyn LlmClient,
    captions: &[SceneCaption],
    global_caption: &str,
    rubric: &Rubric,
    preference: Option<&str>,
    opts: &ScoringOptions,
    cache: Option<&DiskCache>,
) -> Result<Vec<SceneScore>> {
    if captions.is_empty() {
        return Err(Error::invalid("no scenes to score"));
    }
    let mut ordered: Vec<&SceneCaption> = captions.iter().collect();
    ordered.sort_by_key(|c| c.scene_index);
    if ordered.iter().enumerate().any(|(i, c)| c.scene_index != i) {
        return Err(Error::invalid("scene captions must be indexed 0..n without gaps"));
    }
    let n = ordered.len();
    let model = client.model_id();
    let results = ordered_parallel_map(&ordered, opts.concurrency, |i, cap| {
        let mode = scoring_mode(i, n, opts.contextual);
        let ctx = mode == ScoringMode::Contextual;
        let req = ScoringRequest {
            scene_index: i,
            target_caption: &cap.text,
            global_caption,
            prev_caption: ctx.then(|| ordered[i - 1].text.as_str()),
            next_caption: ctx.then(|| ordered[i + 1].text.as_str()),
            preference,
            rubric,
            mode,
        };
        score_one(client, &req, &model, opts, cache).map_err(|e| Error::Scoring {
            scene_index: i,
            source: Box::new(e),
        })
    });
    results.into_iter().collect()
}

fn score_one(
    client: &dyn LlmClient,
    req: &ScoringRequest<'_>,
    model: &str,
    opts: &ScoringOptions,
    cache: Option<&DiskCache>,
) -> Result<SceneScore> {
    let prompt = build_prompt(req)?;
    let key = vec![
        content_hash(&[prompt.as_str()]),
        model.to_string(),
        opts.temperature.to_string(),
    ];
    let cached = cache
        .and_then(|c| c.get("scores", &key))
        .and_then(|s| serde_json::from_str::<CachedScore>(&s).ok());
    let (value, attempts) = match cached {
        Some(c) => (c.value, c.attempts),
        None => {
            let (value, attempts) = opts
                .retry
                .run(|attempt| {
                    let text = client.send(&prompt, opts.temperature).map_err(Error::from)?;
                    parse_score(&text).inspect_err(|e| {
                        tracing::warn!(scene = req.scene_index, attempt, "unusable score response: {e}");
                    })
                })
                .map_err(|(e, _)| e)?;
            if let Some(c) = cache {
                let entry = serde_json::to_string(&CachedScore { value, attempts }).expect("plain struct");
                c.put("scores", &key, &entry)?;
            }
            (value, attempts)
        }
    };
    Ok(SceneScore {
        scene_index: req.scene_index,
        value,
        mode: req.mode,
        attempt_count: attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::BackendError;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn caps(n: usize) -> Vec<SceneCaption> {
        (0..n)
            .map(|i| SceneCaption {
                scene_index: i,
                text: format!("scene number {i} shows item {}", i * 7),
            })
            .collect()
    }

    fn opts() -> ScoringOptions {
        ScoringOptions {
            retry: RetryPolicy::immediate(3),
            ..ScoringOptions::default()
        }
    }

    fn modes(n: usize) -> Vec<ScoringMode> {
        let m = MockLlmClient::new(1, Rubric::tvsum());
        score_scenes(&m, &caps(n), "global", &Rubric::tvsum(), None, &opts(), None)
            .unwrap()
            .iter()
            .map(|s| s.mode)
            .collect()
    }

    #[test]
    fn mode_assignment() {
        use ScoringMode::{Boundary as B, Contextual as C};
        assert_eq!(modes(1), vec![B]);
        assert_eq!(modes(2), vec![B, B]);
        assert_eq!(modes(5), vec![B, C, C, C, B]);
    }

    #[test]
    fn mock_scores_are_deterministic_and_ordered() {
        let r = Rubric::tvsum();
        let m = MockLlmClient::new(9, r.clone());
        let a = score_scenes(&m, &caps(7), "g", &r, Some("cars"), &opts(), None).unwrap();
        let mut serial = opts();
        serial.concurrency = 1;
        let b = score_scenes(&m, &caps(7), "g", &r, Some("cars"), &serial, None).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, s)| s.scene_index == i && s.value <= 100));
    }

    struct Flaky {
        calls: AtomicUsize,
        bad_first: usize,
    }

    impl LlmClient for Flaky {
        fn model_id(&self) -> String {
            "flaky".into()
        }
        fn send(&self, _: &str, _: f64) -> Result<String, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(if n < self.bad_first {
                "maybe 70 or 80".into()
            } else {
                "64".into()
            })
        }
    }

    #[test]
    fn malformed_responses_are_retried() {
        let r = Rubric::tvsum();
        let c = Flaky {
            calls: AtomicUsize::new(0),
            bad_first: 2,
        };
        let s = score_scenes(&c, &caps(1), "g", &r, None, &opts(), None).unwrap();
        assert_eq!((s[0].value, s[0].attempt_count), (64, 3));

        let hopeless = Flaky {
            calls: AtomicUsize::new(0),
            bad_first: 10,
        };
        let err = score_scenes(&hopeless, &caps(1), "g", &r, None, &opts(), None).unwrap_err();
        assert!(matches!(err, Error::Scoring { scene_index: 0, .. }));
        assert_eq!(hopeless.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn cache_skips_backend() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::new(dir.path());
        let r = Rubric::tvsum();
        let c = Flaky {
            calls: AtomicUsize::new(0),
            bad_first: 1,
        };
        let first = score_scenes(&c, &caps(3), "g", &r, None, &opts(), Some(&cache)).unwrap();
        let calls = c.calls.load(Ordering::SeqCst);
        let second = score_scenes(&c, &caps(3), "g", &r, None, &opts(), Some(&cache)).unwrap();
        assert_eq!(first, second);
        assert_eq!(c.calls.load(Ordering::SeqCst), calls);
    }

    #[test]
    fn non_contextual_option() {
        let r = Rubric::tvsum();
        let m = MockLlmClient::new(1, r.clone());
        let mut o = opts();
        o.contextual = false;
        let s = score_scenes(&m, &caps(4), "g", &r, None, &o, None).unwrap();
        assert!(s.iter().all(|s| s.mode == ScoringMode::Boundary));
    }
}
