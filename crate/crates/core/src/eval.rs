//! Keyshot selection under a duration budget and keyshot P/R/F1 evaluation.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::SceneSegmentation;

pub const DEFAULT_BUDGET_FRACTION: f64 = 0.15;
pub const DEFAULT_SPLITS: usize = 5;
/// Share of eligible videos placed in each test split.
pub const TEST_SPLIT_FRACTION: f64 = 0.2;
/// Fixed-point scale for knapsack values; makes optimality and ties exact.
const VALUE_SCALE: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionBudget {
    Fraction(f64),
    AbsoluteFrames(usize),
}

impl Default for SelectionBudget {
    fn default() -> Self {
        SelectionBudget::Fraction(DEFAULT_BUDGET_FRACTION)
    }
}

impl SelectionBudget {
    /// Capacity in frames: `floor(fraction * n)` or the absolute count.
    pub fn capacity(&self, n_frames: usize) -> Result<usize> {
        match *self {
            SelectionBudget::Fraction(f) if f > 0.0 && f <= 1.0 => Ok((f * n_frames as f64 + 1e-9).floor() as usize),
            SelectionBudget::Fraction(f) => Err(Error::invalid(format!("budget fraction {f} outside (0,1]"))),
            SelectionBudget::AbsoluteFrames(n) => Ok(n),
        }
    }
}

/// Fixed-point knapsack value of one segment.
pub fn quantize_value(v: f64) -> i64 {
    (v * VALUE_SCALE).round() as i64
}

/// Exact 0/1 knapsack by dynamic programming. Among optimal sets the
/// lexicographically smallest index set wins.
pub fn knapsack_select(values: &[f64], lengths: &[usize], capacity: usize) -> Result<BTreeSet<usize>> {
    if values.len() != lengths.len() {
        return Err(Error::invalid("values and lengths differ in length"));
    }
    if lengths.contains(&0) {
        return Err(Error::invalid("segment lengths must be positive"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("segment values must be finite"));
    }
    let n = values.len();
    let total: usize = lengths.iter().sum();
    let cap = capacity.min(total);
    let q: Vec<i64> = values.iter().map(|&v| quantize_value(v)).collect();
    // best[i][c]: optimum over items i.. with capacity c (suffix table, so
    // the forward walk below can prefer lower indices).
    let width = cap + 1;
    let mut best = vec![0i64; (n + 1) * width];
    for i in (0..n).rev() {
        let (head, tail) = best.split_at_mut((i + 1) * width);
        let row = &mut head[i * width..];
        let next = &tail[..width];
        for c in 0..width {
            let skip = next[c];
            row[c] = if lengths[i] <= c {
                skip.max(q[i] + next[c - lengths[i]])
            } else {
                skip
            };
        }
    }
    let mut chosen = BTreeSet::new();
    let mut c = cap;
    for i in 0..n {
        let target = best[i * width + c];
        if target == 0 {
            break;
        }
        if lengths[i] <= c && q[i] + best[(i + 1) * width + c - lengths[i]] == target {
            chosen.insert(i);
            c -= lengths[i];
        }
    }
    Ok(chosen)
}

/// Top `budget` shots by score, ties to the lower index.
pub fn greedy_shot_select(shot_scores: &[f64], budget_shots: usize) -> Result<BTreeSet<usize>> {
    if budget_shots > shot_scores.len() {
        return Err(Error::invalid(format!(
            "budget of {budget_shots} shots exceeds {} shots",
            shot_scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..shot_scores.len()).collect();
    order.sort_by(|&a, &b| shot_scores[b].total_cmp(&shot_scores[a]).then(a.cmp(&b)));
    Ok(order.into_iter().take(budget_shots).collect())
}

/// Per-shot mean of frame scores.
pub fn shot_scores_from_frames(frame_scores: &[f64], shots: &SceneSegmentation) -> Result<Vec<f64>> {
    if shots.n_frames() != frame_scores.len() {
        return Err(Error::invalid(format!(
            "shots cover {} frames but {} scores given",
            shots.n_frames(),
            frame_scores.len()
        )));
    }
    Ok(shots
        .ranges()
        .map(|r| {
            let len = r.len() as f64;
            frame_scores[r].iter().sum::<f64>() / len
        })
        .collect())
}

/// Uniform shots of `round(seconds * fps)` frames; the last may be shorter.
pub fn uniform_shots(n_frames: usize, fps: f64, seconds: f64) -> Result<SceneSegmentation> {
    let len = (seconds * fps).round() as usize;
    if len == 0 || n_frames == 0 {
        return Err(Error::invalid("shot length and frame count must be positive"));
    }
    let lengths: Vec<usize> = (0..n_frames.div_ceil(len))
        .map(|i| len.min(n_frames - i * len))
        .collect();
    SceneSegmentation::from_lengths(&lengths)
}

/// Frame mask from selected segments.
pub fn expand_mask(selected: &BTreeSet<usize>, seg: &SceneSegmentation) -> Vec<bool> {
    let mut mask = vec![false; seg.n_frames()];
    for (i, r) in seg.ranges().enumerate() {
        if selected.contains(&i) {
            mask[r].fill(true);
        }
    }
    mask
}

/// Knapsack summary of a per-frame score curve over the given segments.
/// Segment value is the mean frame score times the segment length.
pub fn select_summary(frame_scores: &[f64], seg: &SceneSegmentation, budget: SelectionBudget) -> Result<Vec<bool>> {
    let means = shot_scores_from_frames(frame_scores, seg)?;
    let lengths: Vec<usize> = seg.ranges().map(|r| r.len()).collect();
    let values: Vec<f64> = means.iter().zip(&lengths).map(|(m, &l)| m * l as f64).collect();
    let chosen = knapsack_select(&values, &lengths, budget.capacity(seg.n_frames())?)?;
    Ok(expand_mask(&chosen, seg))
}

/// Reference keyshots from one user's frame annotations.
pub fn gt_to_keyshots(
    frame_annotations: &[f64],
    seg: &SceneSegmentation,
    budget: SelectionBudget,
) -> Result<Vec<bool>> {
    select_summary(frame_annotations, seg, budget)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// `P = |A and B| / |A|`, `R = |A and B| / |B|`; empty sides give 0.
pub fn precision_recall_f1(a: &[bool], b: &[bool]) -> Result<EvalResult> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "mask lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let na = a.iter().filter(|x| **x).count();
    let nb = b.iter().filter(|x| **x).count();
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let (precision, recall) = (ratio(inter, na), ratio(inter, nb));
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EvalResult { precision, recall, f1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Best match among annotators.
    Max,
    /// Average over annotators.
    Mean,
}

pub fn aggregate_users(per_user_f1: &[f64], how: Aggregation) -> Result<f64> {
    if per_user_f1.is_empty() {
        return Err(Error::invalid("no per-user F1 values to aggregate"));
    }
    Ok(match how {
        Aggregation::Max => per_user_f1.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregation::Mean => per_user_f1.iter().sum::<f64>() / per_user_f1.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub n_splits: usize,
    pub test_ids: Vec<Vec<String>>,
}

impl SplitSpec {
    /// `n_splits` seeded test subsets of the eligible videos, each holding
    /// `max(1, round(0.2 n))` ids. Excluded ids (the pseudo-label subset)
    /// never appear.
    pub fn generate(video_ids: &[String], excluded: &BTreeSet<String>, n_splits: usize, seed: u64) -> Result<Self> {
        let eligible: Vec<String> = video_ids.iter().filter(|v| !excluded.contains(*v)).cloned().collect();
        if eligible.is_empty() {
            return Err(Error::invalid("no videos left for evaluation splits"));
        }
        if n_splits == 0 {
            return Err(Error::invalid("need at least one split"));
        }
        let size = ((TEST_SPLIT_FRACTION * eligible.len() as f64).round() as usize).clamp(1, eligible.len());
        let test_ids = (0..n_splits)
            .map(|s| {
                let mut ids = eligible.clone();
                ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64)));
                let mut chosen = ids[..size].to_vec();
                chosen.sort();
                chosen
            })
            .collect();
        Ok(Self {
            seed,
            n_splits,
            test_ids,
        })
    }
}

/// Mean over splits of each split's mean F1.
pub fn split_average(per_split_f1: &[Vec<f64>], spec: &SplitSpec) -> Result<f64> {
    if per_split_f1.len() != spec.n_splits {
        return Err(Error::invalid(format!(
            "{} split results for {} splits",
            per_split_f1.len(),
            spec.n_splits
        )));
    }
    let mut total = 0.0;
    for (i, split) in per_split_f1.iter().enumerate() {
        if split.is_empty() {
            return Err(Error::invalid(format!("split {i} has no results")));
        }
        total += split.iter().sum::<f64>() / split.len() as f64;
    }
    Ok(total / spec.n_splits as f64)
}
