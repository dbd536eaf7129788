//! Run configuration. Every field has a default, so `{}` is a valid config.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::backend::RetryPolicy;
use crate::error::{Error, Result};
use crate::eval::{SelectionBudget, DEFAULT_BUDGET_FRACTION, DEFAULT_SPLITS};
use crate::frames::{NormalizationMode, WeightSchedule, DEFAULT_SHORT_SECONDS};
use crate::io::manifest::DatasetTag;
use crate::pseudo_label::{DEFAULT_EXEMPLARS, DEFAULT_PSEUDO_RATIO};
use crate::rubric::{load_rubric, Rubric};
use crate::scene::{ThresholdGrid, DEFAULT_MIN_SCENE_FRAMES};

pub const ENV_LLM_ENDPOINT: &str = "VSUM_LLM_ENDPOINT";
pub const ENV_LLM_API_KEY: &str = "VSUM_LLM_API_KEY";
pub const ENV_CAPTION_ENDPOINT: &str = "VSUM_CAPTION_ENDPOINT";
pub const ENV_CAPTION_API_KEY: &str = "VSUM_CAPTION_API_KEY";
pub const ENV_CACHE_DIR: &str = "VSUM_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

/// A remote backend; endpoint and key fall back to environment variables.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub caption_backend: BackendConfig,
    pub llm_backend: BackendConfig,
    /// Rubric document; the dataset's built-in rubric when absent.
    pub rubric: Option<PathBuf>,
    /// Per-dataset default when absent: MinMax for SumMe, Exponential otherwise.
    pub normalization: Option<NormalizationMode>,
    pub budget: f64,
    pub threshold_grid: ThresholdGrid,
    pub short_video_seconds: f64,
    /// Fixed (sigma, window) instead of the length-based schedule.
    pub schedule_override: Option<WeightSchedule>,
    pub min_scene_frames: usize,
    pub seed: u64,
    pub concurrency: usize,
    pub cache_dir: Option<PathBuf>,
    pub caption_batch_size: usize,
    pub refine: bool,
    pub pseudo_label: bool,
    pub pseudo_label_ratio: f64,
    pub exemplars: usize,
    pub contextual: bool,
    pub frame_weighting: bool,
    pub temperature: f64,
    pub max_attempts: u32,
    pub retry_base_delay_ms: u64,
    pub n_splits: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            caption_backend: BackendConfig::default(),
            llm_backend: BackendConfig::default(),
            rubric: None,
            normalization: None,
            budget: DEFAULT_BUDGET_FRACTION,
            threshold_grid: ThresholdGrid::default(),
            short_video_seconds: DEFAULT_SHORT_SECONDS,
            schedule_override: None,
            min_scene_frames: DEFAULT_MIN_SCENE_FRAMES,
            seed: 0,
            concurrency: 4,
            cache_dir: None,
            caption_batch_size: crate::caption::DEFAULT_BATCH_SIZE,
            refine: true,
            pseudo_label: true,
            pseudo_label_ratio: DEFAULT_PSEUDO_RATIO,
            exemplars: DEFAULT_EXEMPLARS,
            contextual: true,
            frame_weighting: true,
            temperature: 0.0,
            max_attempts: 3,
            retry_base_delay_ms: 1000,
            n_splits: DEFAULT_SPLITS,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(r) = &cfg.rubric {
            if r.is_relative() {
                cfg.rubric = Some(base_dir.join(r));
            }
        }
        if let Some(c) = &cfg.cache_dir {
            if c.is_relative() {
                cfg.cache_dir = Some(base_dir.join(c));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.budget > 0.0 && self.budget <= 1.0) {
            return bad(format!("budget {} outside (0,1]", self.budget));
        }
        if !(self.short_video_seconds > 0.0) {
            return bad("short_video_seconds must be positive".into());
        }
        if let Some(s) = &self.schedule_override {
            if !(0.0..=1.0).contains(&s.sigma) || !(s.window_seconds > 0.0) {
                return bad("schedule_override needs sigma in [0,1] and a positive window".into());
            }
        }
        if let Some(n) = &self.normalization {
            n.validate()?;
        }
        if self.min_scene_frames == 0 || self.caption_batch_size == 0 || self.concurrency == 0 {
            return bad("min_scene_frames, caption_batch_size and concurrency must be positive".into());
        }
        if !(self.pseudo_label_ratio > 0.0 && self.pseudo_label_ratio <= 1.0) {
            return bad(format!("pseudo_label_ratio {} outside (0,1]", self.pseudo_label_ratio));
        }
        if self.max_attempts == 0 || self.n_splits == 0 {
            return bad("max_attempts and n_splits must be positive".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad(format!("temperature {} outside [0,2]", self.temperature));
        }
        if let Some(r) = &self.rubric {
            if !r.is_file() {
                return bad(format!("rubric file {} does not exist", r.display()));
            }
        }
        Ok(())
    }

    pub fn budget(&self) -> SelectionBudget {
        SelectionBudget::Fraction(self.budget)
    }

    pub fn retry(&self) -> RetryPolicy {
        RetryPolicy {
            max_attempts: self.max_attempts,
            base_delay: Duration::from_millis(self.retry_base_delay_ms),
        }
    }

    pub fn normalization_for(&self, dataset: DatasetTag) -> NormalizationMode {
        self.normalization.unwrap_or(match dataset {
            DatasetTag::Summe => NormalizationMode::MinMax,
            DatasetTag::Tvsum | DatasetTag::Qfvs => NormalizationMode::exponential(),
        })
    }

    pub fn load_rubric(&self, dataset: DatasetTag) -> Result<Rubric> {
        match &self.rubric {
            Some(p) => load_rubric(p),
            None => Rubric::builtin(dataset.as_str()),
        }
    }

    /// Force both backends to the offline mock.
    pub fn force_mock(&mut self) {
        self.caption_backend.kind = BackendKind::Mock;
        self.llm_backend.kind = BackendKind::Mock;
    }

    pub fn cache_dir_or_env(&self) -> Option<PathBuf> {
        self.cache_dir
            .clone()
            .or_else(|| std::env::var_os(ENV_CACHE_DIR).map(PathBuf::from))
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    RunConfig::from_json(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Endpoint from config or environment; missing is a configuration error.
pub fn resolve_endpoint(cfg: &BackendConfig, env_var: &str) -> Result<String> {
    cfg.endpoint
        .clone()
        .or_else(|| std::env::var(env_var).ok())
        .filter(|e| !e.trim().is_empty())
        .ok_or_else(|| Error::Config(format!("http backend needs an endpoint (config or {env_var})")))
}
