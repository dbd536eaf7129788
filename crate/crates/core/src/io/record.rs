//! Per-video run record. Later stages are optional so partial runs persist
//! and reload; wall-clock timings live in a separate file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::caption::SceneCaption;
use crate::error::{Error, Result};
use crate::eval::{Aggregation, EvalResult};
use crate::frames::{NormalizationMode, WeightSchedule};
use crate::io::config::RunConfig;
use crate::io::manifest::DatasetTag;
use crate::scene::SceneSegmentation;
use crate::scoring::SceneScore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationStage {
    pub threshold: f64,
    pub taus: Vec<f64>,
    pub scene_counts: Vec<usize>,
    pub initial: SceneSegmentation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionStage {
    pub backend: String,
    pub global: String,
    pub scenes: Vec<SceneCaption>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreStage {
    pub rubric: String,
    pub rubric_hash: String,
    pub model: String,
    pub scores: Vec<SceneScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStage {
    pub normalization: NormalizationMode,
    pub scene_values: Vec<f64>,
    pub inherited: Vec<f64>,
    pub smoothed: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<WeightSchedule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub final_scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionUnit {
    Scene,
    Shot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStage {
    pub unit: SelectionUnit,
    pub capacity: usize,
    pub selected_units: Vec<usize>,
    /// Selected frame intervals `[start, end)`.
    pub selected_frames: Vec<(usize, usize)>,
    pub n_selected_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEval {
    pub user: String,
    #[serde(flatten)]
    pub result: EvalResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStage {
    pub aggregation: Aggregation,
    pub per_user: Vec<UserEval>,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub video_id: String,
    pub dataset: DatasetTag,
    pub fps: f64,
    pub n_frames: usize,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub user_mean_annotation: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<SegmentationStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined: Option<SceneSegmentation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub captions: Option<CaptionStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<ScoreStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames: Option<FrameStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<SummaryStage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalStage>,
}

impl RunRecord {
    /// Check internal consistency of every stage present.
    pub fn verify(&self) -> Result<()> {
        let n = self.n_frames;
        let bad = |m: String| Err(Error::invalid(format!("record for `{}`: {m}", self.video_id)));
        if let Some(s) = &self.segmentation {
            if s.initial.n_frames() != n {
                return bad("initial segmentation length".into());
            }
        }
        if let Some(r) = &self.refined {
            if r.n_frames() != n {
                return bad("refined segmentation length".into());
            }
        }
        let scenes = self.refined.as_ref().map(SceneSegmentation::len);
        if let (Some(c), Some(k)) = (&self.captions, scenes) {
            if c.scenes.len() != k {
                return bad("caption count differs from scene count".into());
            }
        }
        if let (Some(s), Some(k)) = (&self.scores, scenes) {
            if s.scores.len() != k || s.scores.iter().any(|x| x.value > 100) {
                return bad("scene scores inconsistent".into());
            }
        }
        if let Some(f) = &self.frames {
            if [&f.inherited, &f.smoothed, &f.final_scores]
                .iter()
                .any(|v| v.len() != n)
            {
                return bad("frame curves have wrong length".into());
            }
        }
        if let Some(s) = &self.summary {
            let total: usize = s.selected_frames.iter().map(|(a, b)| b - a).sum();
            if total != s.n_selected_frames || s.selected_frames.iter().any(|&(_, e)| e > n) {
                return bad("summary frames inconsistent".into());
            }
        }
        if let Some(e) = &self.eval {
            if !(0.0..=1.0).contains(&e.f1) {
                return bad("F1 outside [0,1]".into());
            }
        }
        Ok(())
    }

    pub fn summary_mask(&self) -> Option<Vec<bool>> {
        self.summary.as_ref().map(|s| {
            let mut mask = vec![false; self.n_frames];
            for &(a, b) in &s.selected_frames {
                mask[a..b].fill(true);
            }
            mask
        })
    }
}

/// Stage name to elapsed milliseconds, per video.
pub type Timings = BTreeMap<String, BTreeMap<String, u64>>;

/// Pretty JSON with a trailing newline, so reruns produce identical bytes.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn load_record(path: &Path) -> Result<RunRecord> {
    let record: RunRecord = read_json(path)?;
    record.verify()?;
    Ok(record)
}
