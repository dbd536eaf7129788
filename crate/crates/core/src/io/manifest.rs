//! Dataset manifest: videos, per-user annotations and optional artifacts.
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{uniform_shots, Aggregation};
use crate::pseudo_label::{normalize_tvsum_raw, qfvs_shot_annotations};
use crate::scene::SceneSegmentation;

/// Uniform shot length for query-focused evaluation, in seconds.
pub const QFVS_SHOT_SECONDS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetTag {
    Summe,
    Tvsum,
    Qfvs,
}

impl DatasetTag {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetTag::Summe => "summe",
            DatasetTag::Tvsum => "tvsum",
            DatasetTag::Qfvs => "qfvs",
        }
    }

    /// SumMe keeps the best annotator match; the others average.
    pub fn aggregation(self) -> Aggregation {
        match self {
            DatasetTag::Summe => Aggregation::Max,
            DatasetTag::Tvsum | DatasetTag::Qfvs => Aggregation::Mean,
        }
    }
}

/// One annotator's labels. Exactly one field is set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Annotation {
    pub user: String,
    /// Per-frame importance in [0,1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    /// Per-frame importance on a 1-5 scale.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_scores: Option<Vec<f64>>,
    /// Per-frame 0/1 user summary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyshots: Option<Vec<u8>>,
    /// Selected uniform-shot indices of an oracle summary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<BTreeSet<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub id: String,
    pub fps: f64,
    pub n_frames: usize,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    /// Externally supplied segments for reference keyshots, as `[start, end)` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<(usize, usize)>>,
    /// Directory of frame images, read in file-name order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub captions: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preference: Option<String>,
}

impl VideoEntry {
    pub fn duration_seconds(&self) -> f64 {
        self.n_frames as f64 / self.fps
    }

    pub fn qfvs_shots(&self) -> Result<SceneSegmentation> {
        uniform_shots(self.n_frames, self.fps, QFVS_SHOT_SECONDS)
    }

    /// Per-frame labels in [0,1] for one annotator, whatever its encoding.
    pub fn frame_labels(&self, ann: &Annotation) -> Result<Vec<f64>> {
        if let Some(s) = &ann.scores {
            return Ok(s.clone());
        }
        if let Some(r) = &ann.raw_scores {
            return Ok(r.iter().map(|&v| normalize_tvsum_raw(v)).collect());
        }
        if let Some(k) = &ann.keyshots {
            return Ok(k.iter().map(|&v| f64::from(v)).collect());
        }
        if let Some(shots) = &ann.shots {
            let seg = self.qfvs_shots()?;
            let labels = qfvs_shot_annotations(shots, seg.len())?;
            let mut out = Vec::with_capacity(self.n_frames);
            for (r, l) in seg.ranges().zip(labels) {
                out.extend(std::iter::repeat_n(f64::from(l), r.len()));
            }
            return Ok(out);
        }
        Err(Error::invalid(format!("annotation of `{}` has no labels", ann.user)))
    }

    /// Mean per-frame label over annotators, if any.
    pub fn user_mean(&self) -> Result<Option<Vec<f64>>> {
        if self.annotations.is_empty() {
            return Ok(None);
        }
        let users = self
            .annotations
            .iter()
            .map(|a| self.frame_labels(a))
            .collect::<Result<Vec<_>>>()?;
        let n = users.len() as f64;
        Ok(Some(
            (0..self.n_frames)
                .map(|t| users.iter().map(|u| u[t]).sum::<f64>() / n)
                .collect(),
        ))
    }

    pub fn reference_segments(&self) -> Result<Option<SceneSegmentation>> {
        self.segments
            .as_ref()
            .map(|s| SceneSegmentation::new(s.clone(), self.n_frames))
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset: DatasetTag,
    pub videos: Vec<VideoEntry>,
    /// Directory that relative paths resolve against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn manifest_err(field: String, reason: impl Into<String>) -> Error {
    Error::Manifest {
        field,
        reason: reason.into(),
    }
}

impl DatasetManifest {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut m: DatasetManifest =
            serde_json::from_str(text).map_err(|e| manifest_err("<root>".into(), e.to_string()))?;
        m.base_dir = base_dir.to_path_buf();
        m.validate()?;
        Ok(m)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn video(&self, id: &str) -> Result<&VideoEntry> {
        self.videos
            .iter()
            .find(|v| v.id == id)
            .ok_or_else(|| manifest_err("videos".into(), format!("no video with id `{id}`")))
    }

    pub fn ids(&self) -> Vec<String> {
        self.videos.iter().map(|v| v.id.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.videos.is_empty() {
            return Err(manifest_err("videos".into(), "manifest lists no videos"));
        }
        let mut seen = BTreeSet::new();
        for (i, v) in self.videos.iter().enumerate() {
            let at = |f: &str| format!("videos[{i}] ({}).{f}", v.id);
            if v.id.is_empty() || v.id.contains(['/', '\\']) || v.id == "." || v.id == ".." {
                return Err(manifest_err(at("id"), "id must be a non-empty file-name-safe string"));
            }
            if !seen.insert(v.id.as_str()) {
                return Err(manifest_err(at("id"), "duplicate video id"));
            }
            if !(v.fps > 0.0 && v.fps.is_finite()) {
                return Err(manifest_err(at("fps"), format!("fps must be positive, got {}", v.fps)));
            }
            if v.n_frames == 0 {
                return Err(manifest_err(at("n_frames"), "video has no frames"));
            }
            if let Some(s) = &v.segments {
                SceneSegmentation::new(s.clone(), v.n_frames)
                    .map_err(|e| manifest_err(at("segments"), e.to_string()))?;
            }
            for (j, a) in v.annotations.iter().enumerate() {
                let field = at(&format!("annotations[{j}]"));
                self.validate_annotation(v, a, &field)?;
            }
        }
        Ok(())
    }

    fn validate_annotation(&self, v: &VideoEntry, a: &Annotation, field: &str) -> Result<()> {
        let set = [
            a.scores.is_some(),
            a.raw_scores.is_some(),
            a.keyshots.is_some(),
            a.shots.is_some(),
        ]
        .iter()
        .filter(|x| **x)
        .count();
        if set != 1 {
            return Err(manifest_err(
                field.into(),
                "exactly one of scores, raw_scores, keyshots, shots must be given",
            ));
        }
        let check_len = |len: usize| {
            if len != v.n_frames {
                Err(manifest_err(
                    field.into(),
                    format!("annotation has {len} frames but video `{}` has {}", v.id, v.n_frames),
                ))
            } else {
                Ok(())
            }
        };
        if let Some(s) = &a.scores {
            check_len(s.len())?;
            if s.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(manifest_err(field.into(), "scores must lie in [0,1]"));
            }
        }
        if let Some(r) = &a.raw_scores {
            check_len(r.len())?;
            if r.iter().any(|x| !(1.0..=5.0).contains(x)) {
                return Err(manifest_err(field.into(), "raw_scores must lie in [1,5]"));
            }
        }
        if let Some(k) = &a.keyshots {
            check_len(k.len())?;
            if k.iter().any(|x| *x > 1) {
                return Err(manifest_err(field.into(), "keyshots must be 0/1"));
            }
        }
        if let Some(shots) = &a.shots {
            let n = v
                .qfvs_shots()
                .map_err(|e| manifest_err(field.into(), e.to_string()))?
                .len();
            if let Some(bad) = shots.iter().find(|&&s| s >= n) {
                return Err(manifest_err(
                    field.into(),
                    format!("shot {bad} out of range ({n} shots)"),
                ));
            }
        }
        Ok(())
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    DatasetManifest::from_json(&text, &base)
}
