//! Scene scores to a per-frame importance curve: normalize, inherit, cosine
//! smoothing between scene midpoints, then within-scene weighting.

mod cluster;
mod weights;

pub use cluster::{elbow_k, fit_kmeans, kmeans_path, ClusterModel, MAX_ITERATIONS};
pub use weights::{
    consistency, frame_weights, schedule, segment_weight, uniqueness, WeightSchedule, DEFAULT_SHORT_SECONDS,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::SceneSegmentation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum NormalizationMode {
    MinMax,
    Exponential {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
}

fn default_alpha() -> f64 {
    1.0
}

impl NormalizationMode {
    pub fn exponential() -> Self {
        NormalizationMode::Exponential { alpha: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NormalizationMode::Exponential { alpha } if !(alpha > 0.0 && alpha.is_finite()) => Err(Error::Config(
                format!("exponential alpha must be positive, got {alpha}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Rescale to [0,1]; an all-equal input maps to 0.5 everywhere.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

pub fn normalize(scores: &[f64], mode: NormalizationMode) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::invalid("cannot normalize an empty score list"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scene scores must be finite"));
    }
    mode.validate()?;
    let u = min_max(scores);
    Ok(match mode {
        NormalizationMode::MinMax => u,
        NormalizationMode::Exponential { alpha } => {
            let denom = alpha.exp_m1();
            u.into_iter().map(|x| (alpha * x).exp_m1() / denom).collect()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveStage {
    Inherited,
    Smoothed,
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameScoreCurve {
    pub values: Vec<f64>,
    pub stage: CurveStage,
}

/// Piecewise-constant curve: each frame takes its scene's value.
pub fn inherit(scene_values: &[f64], seg: &SceneSegmentation) -> Result<FrameScoreCurve> {
    if scene_values.len() != seg.len() {
        return Err(Error::invalid(format!(
            "{} scene values for {} scenes",
            scene_values.len(),
            seg.len()
        )));
    }
    let mut values = Vec::with_capacity(seg.n_frames());
    for (r, &v) in seg.ranges().zip(scene_values) {
        values.extend(std::iter::repeat_n(v, r.len()));
    }
    Ok(FrameScoreCurve {
        values,
        stage: CurveStage::Inherited,
    })
}

/// Cosine ramp from 0 at `m_i` to 1 at `m_next`.
///
/// Written as `(1 - sin(pi (1/2 - x))) / 2`, equal to `(1 - cos(pi x)) / 2`,
/// so that the quarter points come out exact in floating point.
pub fn cosine_alpha(t: f64, m_i: f64, m_next: f64) -> f64 {
    let x = ((t - m_i) / (m_next - m_i)).clamp(0.0, 1.0);
    (1.0 - (PI * (0.5 - x)).sin()) / 2.0
}

fn blend(a: f64, b: f64, alpha: f64) -> f64 {
    if a == b {
        return a;
    }
    ((1.0 - alpha) * a + alpha * b).clamp(a.min(b), a.max(b))
}

/// Blend consecutive scene values between their midpoints; frames outside
/// the first and last midpoint keep the inherited value.
pub fn cosine_smooth(z0: &FrameScoreCurve, seg: &SceneSegmentation) -> Result<FrameScoreCurve> {
    if z0.values.len() != seg.n_frames() {
        return Err(Error::invalid("curve length does not match segmentation"));
    }
    let scene_values: Vec<f64> = seg.intervals().iter().map(|&(s, _)| z0.values[s]).collect();
    let mids = seg.midpoints();
    let mut values = z0.values.clone();
    for i in 0..mids.len().saturating_sub(1) {
        let (m0, m1) = (mids[i], mids[i + 1]);
        let first = m0.ceil() as usize;
        let last = (m1.floor() as usize).min(values.len() - 1);
        for (t, v) in values.iter_mut().enumerate().take(last + 1).skip(first) {
            *v = blend(scene_values[i], scene_values[i + 1], cosine_alpha(t as f64, m0, m1));
        }
    }
    Ok(FrameScoreCurve {
        values,
        stage: CurveStage::Smoothed,
    })
}

/// Elementwise product of the smoothed curve and frame weights, rescaled to [0,1].
pub fn combine(z1: &FrameScoreCurve, weights: &[f64]) -> Result<FrameScoreCurve> {
    if z1.values.len() != weights.len() {
        return Err(Error::invalid(format!(
            "curve has {} frames but {} weights",
            z1.values.len(),
            weights.len()
        )));
    }
    let product: Vec<f64> = z1.values.iter().zip(weights).map(|(z, w)| z * w).collect();
    Ok(FrameScoreCurve {
        values: min_max(&product),
        stage: CurveStage::Weighted,
    })
}
