//! Pseudo labels from a small annotated subset: segment scores, high/low
//! exemplars, and the prompts that mine reasons and synthesize a rubric.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::caption::SceneCaption;
use crate::error::{Error, Result};
use crate::scene::SceneSegmentation;

/// Exemplars taken from each end of the ranking.
pub const DEFAULT_EXEMPLARS: usize = 3;
/// Fraction of a dataset's videos used for pseudo labels.
pub const DEFAULT_PSEUDO_RATIO: f64 = 0.10;

/// Per-frame ground-truth importance in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAnnotations {
    scores: Vec<f64>,
}

impl FrameAnnotations {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some((t, v)) = scores.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("annotation {v} at frame {t} outside [0,1]")));
        }
        Ok(Self { scores })
    }

    /// Mean across annotators of already-normalized per-user scores.
    pub fn mean_of_users(users: &[Vec<f64>]) -> Result<Self> {
        let n = users.first().map_or(0, Vec::len);
        if users.is_empty() || users.iter().any(|u| u.len() != n) {
            return Err(Error::invalid(
                "annotator score vectors must be non-empty and equal length",
            ));
        }
        let scores = (0..n)
            .map(|t| users.iter().map(|u| u[t]).sum::<f64>() / users.len() as f64)
            .collect();
        Self::new(scores)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn n_frames(&self) -> usize {
        self.scores.len()
    }
}

/// Map a 1-5 importance rating onto `[0, 1]`.
pub fn normalize_tvsum_raw(raw: f64) -> f64 {
    (raw - 1.0) / 4.0
}

/// One mean score per segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentScoreSet {
    pub scores: Vec<f64>,
    pub segmentation: SceneSegmentation,
}

/// Arithmetic mean of the frame annotations inside each segment.
pub fn segment_scores(g: &FrameAnnotations, seg: &SceneSegmentation) -> Result<SegmentScoreSet> {
    if g.n_frames() != seg.n_frames() {
        return Err(Error::invalid(format!(
            "annotations cover {} frames but segmentation covers {}",
            g.n_frames(),
            seg.n_frames()
        )));
    }
    let scores = seg
        .ranges()
        .map(|r| {
            let len = r.len() as f64;
            g.scores()[r].iter().sum::<f64>() / len
        })
        .collect();
    Ok(SegmentScoreSet {
        scores,
        segmentation: seg.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub segment_index: usize,
    pub caption: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarSet {
    pub high: Vec<Exemplar>,
    pub low: Vec<Exemplar>,
    /// Set when fewer than `2k` segments forced a smaller `k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Top-k and bottom-k segments by score; the ranking orders by score
/// descending, then by segment index ascending.
pub fn select_exemplars(s: &SegmentScoreSet, captions: &[SceneCaption], k: usize) -> Result<ExemplarSet> {
    let n = s.scores.len();
    if captions.len() != n {
        return Err(Error::invalid(format!("{} captions for {n} segments", captions.len())));
    }
    let mut warning = None;
    let k = if 2 * k > n {
        let reduced = n / 2;
        let msg = format!("only {n} segments; exemplar count reduced from {k} to {reduced}");
        tracing::warn!("{msg}");
        warning = Some(msg);
        reduced
    } else {
        k
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s.scores[b].total_cmp(&s.scores[a]).then(a.cmp(&b)));
    let caption_of = |i: usize| {
        captions
            .iter()
            .find(|c| c.scene_index == i)
            .map(|c| c.text.clone())
            .ok_or_else(|| Error::invalid(format!("no caption for segment {i}")))
    };
    let to_exemplar = |&i: &usize| -> Result<Exemplar> {
        Ok(Exemplar {
            segment_index: i,
            caption: caption_of(i)?,
            score: s.scores[i],
        })
    };
    let high = order[..k].iter().map(to_exemplar).collect::<Result<_>>()?;
    let low = order[n - k..].iter().rev().map(to_exemplar).collect::<Result<_>>()?;
    Ok(ExemplarSet { high, low, warning })
}

const REASON_KEYS: [&str; 3] = ["reason_positive", "reason_negative", "reason_difference"];

/// Reason-mining prompt asking for a strict three-key JSON object.
pub fn build_reason_prompt(ex: &ExemplarSet) -> Result<String> {
    if ex.high.is_empty() || ex.low.is_empty() {
        return Err(Error::invalid(
            "reason prompt needs at least one high and one low exemplar",
        ));
    }
    let mut p = String::new();
    p.push_str(
        "You are given scene descriptions from one video together with their human importance \
         scores in [0,1].\n\n",
    );
    p.push_str("HIGH-score segments:\n");
    for (i, e) in ex.high.iter().enumerate() {
        let _ = writeln!(
            p,
            "{}. [segment {}, score {:.4}] {}",
            i + 1,
            e.segment_index,
            e.score,
            e.caption
        );
    }
    p.push_str("\nLOW-score segments:\n");
    for (i, e) in ex.low.iter().enumerate() {
        let _ = writeln!(
            p,
            "{}. [segment {}, score {:.4}] {}",
            i + 1,
            e.segment_index,
            e.score,
            e.caption
        );
    }
    p.push_str(
        "\nYou will write THREE concrete reasons for this video and return STRICT JSON with the keys:\n\
         - \"reason_positive\": one succinct but specific reason why the HIGH-score segments are key.\n\
         - \"reason_negative\": one succinct but specific reason why the LOW-score segments are not key.\n\
         - \"reason_difference\": one succinct but specific reason explaining their essential difference.\n\
         Ground each reason in observable visual elements and actions. Return only the JSON object.\n",
    );
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasonTriple {
    pub reason_positive: String,
    pub reason_negative: String,
    pub reason_difference: String,
}

/// First substring of `text` that parses as a JSON object.
pub(crate) fn first_json_object(text: &str) -> Option<serde_json::Map<String, serde_json::Value>> {
    text.match_indices('{').find_map(|(i, _)| {
        serde_json::Deserializer::from_str(&text[i..])
            .into_iter::<serde_json::Value>()
            .next()
            .and_then(|v| v.ok())
            .and_then(|v| match v {
                serde_json::Value::Object(map) => Some(map),
                _ => None,
            })
    })
}

/// Parse the first JSON object in a model response into a reason triple.
pub fn parse_reason_json(text: &str) -> Result<ReasonTriple> {
    let object = first_json_object(text).ok_or_else(|| Error::MalformedReason("no JSON object in response".into()))?;

    let mut fields = REASON_KEYS.iter().map(|key| match object.get(*key) {
        Some(serde_json::Value::String(s)) if !s.trim().is_empty() => Ok(s.trim().to_string()),
        Some(_) => Err(Error::MalformedReason(format!("`{key}` is empty or not a string"))),
        None => Err(Error::MalformedReason(format!("missing key `{key}`"))),
    });
    Ok(ReasonTriple {
        reason_positive: fields.next().expect("three keys")?,
        reason_negative: fields.next().expect("three keys")?,
        reason_difference: fields.next().expect("three keys")?,
    })
}

/// Second-stage prompt that abstracts mined reasons into a rubric.
pub fn build_rubric_prompt(reasons: &[ReasonTriple], dataset_tag: &str) -> Result<String> {
    if reasons.is_empty() {
        return Err(Error::invalid("rubric prompt needs at least one reason triple"));
    }
    let mut p = String::new();
    let _ = writeln!(
        p,
        "Below are reasons mined from annotated videos of the `{dataset_tag}` dataset. Each entry \
         explains why high-importance scenes matter, why low-importance scenes do not, and what \
         separates them.\n"
    );
    for (i, r) in reasons.iter().enumerate() {
        let _ = writeln!(p, "Video {}:", i + 1);
        let _ = writeln!(p, "  positive: {}", r.reason_positive);
        let _ = writeln!(p, "  negative: {}", r.reason_negative);
        let _ = writeln!(p, "  difference: {}", r.reason_difference);
    }
    p.push_str(
        "\nConsolidate these reasons into a scoring rubric:\n\
         (i) Cluster recurring positive, negative and difference cues across videos.\n\
         (ii) Elevate the clusters into weighted evaluation dimensions with explicit constraints and penalties.\n\
         (iii) Add dataset-specific checklists that capture this dataset's idiosyncrasies.\n\
         (iv) Formalize a calibration ladder and the exact output rule: output exactly one integer in [0,100].\n\
         Report dimension weights that sum to 1 and penalties as non-positive integers.\n\
         Return the rubric as one JSON object with the fields name, weights (key, name, weight, description), \
         penalties (name, value, trigger), preference_adjustment_bound, calibration and output_rule.\n",
    );
    Ok(p)
}

/// Seeded choice of `ceil(ratio * n)` ids without replacement, in input order.
pub fn sample_pseudo_videos(video_ids: &[String], ratio: f64, seed: u64) -> Result<Vec<String>> {
    if video_ids.is_empty() {
        return Err(Error::invalid("no videos to sample pseudo labels from"));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid(format!("pseudo-label ratio {ratio} outside (0,1]")));
    }
    let n = video_ids.len();
    let count = ((ratio * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: BTreeSet<usize> = sample(&mut rng, n, count).into_iter().collect();
    Ok(chosen.into_iter().map(|i| video_ids[i].clone()).collect())
}

/// Binary per-shot labels from an oracle summary.
pub fn qfvs_shot_annotations(oracle_selected_shots: &BTreeSet<usize>, n_shots: usize) -> Result<Vec<u8>> {
    if let Some(&bad) = oracle_selected_shots.iter().find(|&&s| s >= n_shots) {
        return Err(Error::invalid(format!(
            "oracle shot {bad} out of range for {n_shots} shots"
        )));
    }
    Ok((0..n_shots)
        .map(|i| u8::from(oracle_selected_shots.contains(&i)))
        .collect())
}
