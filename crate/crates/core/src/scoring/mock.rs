//! Deterministic offline LLM: answers scoring prompts with the rubric formula
//! applied to per-scene features, and reason/rubric prompts with fixed JSON.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::client::LlmClient;
use super::prompt::{extract_block, NEXT_HEADER, PREFERENCE_PREFIX, PREV_HEADER, TARGET_HEADER};
use crate::backend::seeded_u64;
use crate::error::BackendError;
use crate::rubric::Rubric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Novelty {
    New,
    Duplicated,
    Mixed,
}

impl Novelty {
    pub fn adjustment(self) -> i32 {
        match self {
            Novelty::New => 5,
            Novelty::Duplicated => -5,
            Novelty::Mixed => 0,
        }
    }
}

/// Per-scene fixture for the mock scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockSceneFeatures {
    /// Dimension scores in [0,100] keyed by rubric dimension key; missing keys count as 0.
    pub dimensions: BTreeMap<String, f64>,
    #[serde(default)]
    pub penalties: Vec<String>,
    pub novelty: Novelty,
    #[serde(default)]
    pub preference_match: i32,
}

impl MockSceneFeatures {
    pub fn uniform(value: f64, rubric: &Rubric) -> Self {
        Self {
            dimensions: rubric.dimensions.iter().map(|d| (d.key.clone(), value)).collect(),
            penalties: Vec::new(),
            novelty: Novelty::Mixed,
            preference_match: 0,
        }
    }
}

/// `clamp(round(sum_k w_k dim_k + penalties + PrefAdj + context), 0, 100)`.
///
/// Rounding is half away from zero. The weighted sum is snapped to 1e-6 first
/// so that sums like `0.15 * 50` land exactly on their decimal value.
pub fn mock_rubric_score(features: &MockSceneFeatures, rubric: &Rubric, is_contextual: bool) -> u8 {
    let weighted: f64 = rubric
        .dimensions
        .iter()
        .map(|d| {
            d.weight
                * features
                    .dimensions
                    .get(&d.key)
                    .copied()
                    .unwrap_or(0.0)
                    .clamp(0.0, 100.0)
        })
        .sum();
    let weighted = (weighted * 1e6).round() / 1e6;
    let penalties: i32 = rubric
        .penalties
        .iter()
        .filter(|p| features.penalties.iter().any(|t| t == &p.name))
        .map(|p| p.value)
        .sum();
    let bound = rubric.preference_adjustment_bound;
    let pref = features.preference_match.clamp(-bound, bound);
    let context = if is_contextual {
        features.novelty.adjustment()
    } else {
        0
    };
    (weighted + f64::from(penalties + pref + context))
        .round()
        .clamp(0.0, 100.0) as u8
}

fn words(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        1.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

/// Novelty of a target caption against both neighbors by word-set overlap.
pub fn novelty_from_captions(target: &str, prev: &str, next: &str) -> Novelty {
    let t = words(target);
    let (sp, sn) = (jaccard(&t, &words(prev)), jaccard(&t, &words(next)));
    if sp < 0.5 && sn < 0.5 {
        Novelty::New
    } else if sp >= 0.8 && sn >= 0.8 {
        Novelty::Duplicated
    } else {
        Novelty::Mixed
    }
}

/// Mock LLM backend. Scoring answers follow `mock_rubric_score`; features
/// come from fixtures keyed by target caption, else from a seeded hash.
#[derive(Debug, Clone)]
pub struct MockLlmClient {
    seed: u64,
    rubric: Rubric,
    fixtures: BTreeMap<String, MockSceneFeatures>,
}

impl MockLlmClient {
    pub fn new(seed: u64, rubric: Rubric) -> Self {
        Self {
            seed,
            rubric,
            fixtures: BTreeMap::new(),
        }
    }

    pub fn with_fixtures(mut self, fixtures: BTreeMap<String, MockSceneFeatures>) -> Self {
        self.fixtures = fixtures;
        self
    }

    /// Seeded features for a caption; the preference term is only drawn
    /// when a preference is present.
    pub fn features_for(&self, target: &str, preference: Option<&str>) -> MockSceneFeatures {
        if let Some(f) = self.fixtures.get(target) {
            return f.clone();
        }
        let h = seeded_u64(self.seed, target.as_bytes());
        let dimensions = self
            .rubric
            .dimensions
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let bits = (h >> ((i * 7) % 57)) & 0x7f;
                (d.key.clone(), (bits % 101) as f64)
            })
            .collect();
        let p = seeded_u64(self.seed ^ 0x9E37, target.as_bytes());
        let penalties = self
            .rubric
            .penalties
            .iter()
            .enumerate()
            .filter(|(i, _)| (p >> (i * 4)) & 0xF == 0)
            .map(|(_, pen)| pen.name.clone())
            .collect();
        let preference_match = preference.map_or(0, |pref| {
            let b = i64::from(self.rubric.preference_adjustment_bound);
            let h = seeded_u64(self.seed, format!("{target}\u{0}{pref}").as_bytes());
            ((h % (2 * b as u64 + 1)) as i64 - b) as i32
        });
        MockSceneFeatures {
            dimensions,
            penalties,
            novelty: Novelty::Mixed,
            preference_match,
        }
    }

    fn answer_score(&self, prompt: &str) -> Result<String, BackendError> {
        let target = extract_block(prompt, TARGET_HEADER)
            .ok_or_else(|| BackendError::Response("mock: prompt has no target scene".into()))?;
        let preference = prompt.lines().find_map(|l| l.strip_prefix(PREFERENCE_PREFIX));
        let mut features = self.features_for(target, preference);
        let neighbors = extract_block(prompt, PREV_HEADER).zip(extract_block(prompt, NEXT_HEADER));
        if let Some((prev, next)) = neighbors {
            if !self.fixtures.contains_key(target) {
                features.novelty = novelty_from_captions(target, prev, next);
            }
        }
        Ok(mock_rubric_score(&features, &self.rubric, neighbors.is_some()).to_string())
    }

    fn answer_reasons(&self, prompt: &str) -> String {
        const VISUAL: [&str; 4] = [
            "people actively handle the main objects",
            "the key action is clearly visible",
            "the scene shows the decisive step of the activity",
            "the subject is centered and in motion",
        ];
        const DULL: [&str; 4] = [
            "the camera lingers on static background",
            "the frames show titles or idle waiting",
            "nothing new happens compared with earlier scenes",
            "the subject is small or out of focus",
        ];
        let h = seeded_u64(self.seed, prompt.as_bytes());
        serde_json::json!({
            "reason_positive": format!("High-score scenes matter because {}.", VISUAL[(h % 4) as usize]),
            "reason_negative": format!("Low-score scenes matter less because {}.", DULL[((h >> 8) % 4) as usize]),
            "reason_difference": "High-score scenes show progress in the main activity while low-score scenes do not.",
        })
        .to_string()
    }
}

impl LlmClient for MockLlmClient {
    fn model_id(&self) -> String {
        format!("mock-seed-{}", self.seed)
    }

    fn send(&self, prompt: &str, _temperature: f64) -> Result<String, BackendError> {
        if prompt.contains("return STRICT JSON with the keys") {
            Ok(self.answer_reasons(prompt))
        } else if prompt.contains("calibration ladder") {
            serde_json::to_string_pretty(&self.rubric).map_err(|e| BackendError::Response(e.to_string()))
        } else if prompt.contains(TARGET_HEADER) {
            self.answer_score(prompt)
        } else {
            Err(BackendError::Response("mock: unrecognized prompt".into()))
        }
    }
}
