//! Caption documents: one global description plus one text per scene.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::caption::SceneCaption;
use crate::error::{Error, Result};
use crate::scene::SceneSegmentation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneCaptionEntry {
    pub scene_index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionDocument {
    pub video_id: String,
    #[serde(default)]
    pub backend: String,
    pub global: String,
    pub scenes: Vec<SceneCaptionEntry>,
}

impl CaptionDocument {
    pub fn new(
        video_id: &str,
        backend: &str,
        global: &str,
        seg: &SceneSegmentation,
        captions: &[SceneCaption],
    ) -> Result<Self> {
        if captions.len() != seg.len() {
            return Err(Error::invalid(format!(
                "{} captions for {} scenes",
                captions.len(),
                seg.len()
            )));
        }
        let scenes = seg
            .intervals()
            .iter()
            .zip(captions)
            .map(|(&(start, end), c)| SceneCaptionEntry {
                scene_index: c.scene_index,
                start,
                end,
                text: c.text.clone(),
            })
            .collect();
        Ok(Self {
            video_id: video_id.to_string(),
            backend: backend.to_string(),
            global: global.to_string(),
            scenes,
        })
    }

    pub fn validate(&self, path: &Path) -> Result<()> {
        let fail = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        if self.global.trim().is_empty() {
            return Err(fail("empty global caption".into()));
        }
        let mut cursor = 0;
        for (i, s) in self.scenes.iter().enumerate() {
            if s.scene_index != i || s.start != cursor || s.end <= s.start || s.text.trim().is_empty() {
                return Err(fail(format!(
                    "scene entry {i} is out of order, empty or not contiguous"
                )));
            }
            cursor = s.end;
        }
        Ok(())
    }

    /// Scene captions when the document's intervals equal `seg`.
    pub fn scene_captions_for(&self, seg: &SceneSegmentation) -> Option<Vec<SceneCaption>> {
        let intervals: Vec<(usize, usize)> = self.scenes.iter().map(|s| (s.start, s.end)).collect();
        (intervals == seg.intervals()).then(|| {
            self.scenes
                .iter()
                .map(|s| SceneCaption {
                    scene_index: s.scene_index,
                    text: s.text.clone(),
                })
                .collect()
        })
    }
}

pub fn load_captions(path: &Path) -> Result<CaptionDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: CaptionDocument = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    doc.validate(path)?;
    Ok(doc)
}
