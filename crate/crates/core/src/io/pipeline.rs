//! Run orchestration: per-video stages, dataset-level pseudo labelling and
//! evaluation, and persistence of every intermediate.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::content_hash;
use crate::caption::{
    caption_scenes, caption_video, CaptionClient, CaptionOptions, HttpCaptionClient, MockCaptionClient,
};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_users, greedy_shot_select, gt_to_keyshots, knapsack_select, precision_recall_f1, shot_scores_from_frames,
    split_average, SplitSpec,
};
use crate::frames::{combine, cosine_smooth, frame_weights, inherit, normalize, schedule};
use crate::io::cache::DiskCache;
use crate::io::captions::{load_captions, CaptionDocument};
use crate::io::config::{
    resolve_endpoint, BackendKind, RunConfig, ENV_CAPTION_API_KEY, ENV_CAPTION_ENDPOINT, ENV_LLM_API_KEY,
    ENV_LLM_ENDPOINT,
};
use crate::io::embeddings::load_embeddings;
use crate::io::frames::FrameStore;
use crate::io::manifest::{DatasetManifest, DatasetTag, VideoEntry};
use crate::io::plot::emit_plot_data;
use crate::io::record::{
    write_json, CaptionStage, EvalStage, FrameStage, RunRecord, ScoreStage, SegmentationStage, SelectionUnit,
    SummaryStage, Timings, UserEval,
};
use crate::pseudo_label::{
    build_reason_prompt, build_rubric_prompt, parse_reason_json, sample_pseudo_videos, segment_scores,
    select_exemplars, ExemplarSet, FrameAnnotations, ReasonTriple,
};
use crate::rubric::Rubric;
use crate::scene::{
    phash, preprocess_frame, refine_short_scenes, scene_count_curve, segment, FrameEmbeddings, SceneSegmentation,
};
use crate::scoring::{score_scenes, HttpLlmClient, LlmClient, MockLlmClient, ScoringOptions};

/// Pipeline stages in execution order; a run executes everything up to its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Segment,
    Refine,
    Caption,
    Pseudolabel,
    MineReasons,
    Score,
    Frames,
    Select,
    Eval,
    Pipeline,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Segment => "segment",
            Stage::Refine => "refine",
            Stage::Caption => "caption",
            Stage::Pseudolabel => "pseudolabel",
            Stage::MineReasons => "mine-reasons",
            Stage::Score => "score",
            Stage::Frames => "frames",
            Stage::Select => "select",
            Stage::Eval => "eval",
            Stage::Pipeline => "pipeline",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoVideo {
    pub video_id: String,
    pub segment_scores: Vec<f64>,
    pub exemplars: ExemplarSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelOutcome {
    pub videos: Vec<PseudoVideo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinedReasons {
    pub reasons: BTreeMap<String, ReasonTriple>,
    /// `synthesized` or the fallback rubric's name.
    pub rubric_source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEval {
    pub per_video_f1: BTreeMap<String, f64>,
    pub excluded: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splits: Option<SplitSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_means: Option<Vec<f64>>,
    pub mean_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub dataset: DatasetTag,
    pub target: Stage,
    pub seed: u64,
    pub videos: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_label_videos: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rubric: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<DatasetEval>,
}

pub struct RunOptions {
    pub target: Stage,
    pub video: Option<String>,
    pub out_dir: PathBuf,
}

struct VideoWork<'m> {
    entry: &'m VideoEntry,
    record: RunRecord,
    embeddings: Option<FrameEmbeddings>,
    timings: BTreeMap<String, u64>,
}

pub struct Pipeline {
    cfg: RunConfig,
    manifest: DatasetManifest,
    cache: Option<DiskCache>,
}

fn timed<T>(timings: &mut BTreeMap<String, u64>, stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    timings.insert(stage.name().to_string(), start.elapsed().as_millis() as u64);
    out
}

impl Pipeline {
    pub fn new(cfg: RunConfig, manifest: DatasetManifest) -> Result<Self> {
        cfg.validate()?;
        manifest.validate()?;
        let cache = cfg.cache_dir_or_env().map(DiskCache::new);
        Ok(Self { cfg, manifest, cache })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    fn run_id(&self, opts: &RunOptions) -> String {
        let cfg = serde_json::to_string(&self.cfg).expect("config serializes");
        let manifest = serde_json::to_string(&self.manifest).expect("manifest serializes");
        content_hash(&[
            cfg.as_str(),
            manifest.as_str(),
            opts.target.name(),
            opts.video.as_deref().unwrap_or(""),
        ])[..16]
            .to_string()
    }

    fn caption_client(&self, v: &VideoEntry) -> Result<Box<dyn CaptionClient>> {
        match self.cfg.caption_backend.kind {
            BackendKind::Mock => Ok(Box::new(MockCaptionClient::new(self.cfg.seed))),
            BackendKind::Http => {
                let endpoint = resolve_endpoint(&self.cfg.caption_backend, ENV_CAPTION_ENDPOINT)?;
                let store = FrameStore::open(&self.frames_dir(v)?)?;
                Ok(Box::new(HttpCaptionClient::new(
                    endpoint,
                    std::env::var(ENV_CAPTION_API_KEY).ok(),
                    Arc::new(store),
                )))
            }
        }
    }

    fn llm_client(&self, rubric: &Rubric) -> Result<Box<dyn LlmClient>> {
        match self.cfg.llm_backend.kind {
            BackendKind::Mock => Ok(Box::new(MockLlmClient::new(self.cfg.seed, rubric.clone()))),
            BackendKind::Http => {
                let endpoint = resolve_endpoint(&self.cfg.llm_backend, ENV_LLM_ENDPOINT)?;
                let model = self
                    .cfg
                    .llm_backend
                    .model
                    .clone()
                    .ok_or_else(|| Error::Config("http llm backend needs `model`".into()))?;
                Ok(Box::new(HttpLlmClient::new(
                    endpoint,
                    std::env::var(ENV_LLM_API_KEY).ok(),
                    model,
                )))
            }
        }
    }

    fn frames_dir(&self, v: &VideoEntry) -> Result<PathBuf> {
        v.frames
            .as_ref()
            .map(|p| self.manifest.resolve(p))
            .ok_or_else(|| Error::Manifest {
                field: format!("videos.{}.frames", v.id),
                reason: "this stage needs a frame directory".into(),
            })
    }

    fn embeddings(&self, work: &mut VideoWork<'_>) -> Result<FrameEmbeddings> {
        if let Some(e) = &work.embeddings {
            return Ok(e.clone());
        }
        let rel = work.entry.embeddings.as_ref().ok_or_else(|| Error::Manifest {
            field: format!("videos.{}.embeddings", work.entry.id),
            reason: "refinement and frame weighting need an embeddings file".into(),
        })?;
        let path = self.manifest.resolve(rel);
        let emb = load_embeddings(&path)?;
        if emb.n_frames() != work.entry.n_frames {
            return Err(Error::Format {
                path,
                reason: format!(
                    "{} rows but the video has {} frames",
                    emb.n_frames(),
                    work.entry.n_frames
                ),
            });
        }
        work.embeddings = Some(emb.clone());
        Ok(emb)
    }

    fn segment_stage(&self, v: &VideoEntry) -> Result<SegmentationStage> {
        let dir = self.frames_dir(v)?;
        let store = FrameStore::open(&dir)?;
        if store.len() != v.n_frames {
            return Err(Error::Format {
                path: dir,
                reason: format!("{} frame images but manifest says {}", store.len(), v.n_frames),
            });
        }
        let hashes = (0..store.len())
            .into_par_iter()
            .map(|i| {
                store
                    .load(i)
                    .and_then(|img| preprocess_frame(&img, i))
                    .map(|g| phash(&g))
            })
            .collect::<Result<Vec<_>>>()?;
        let (taus, scene_counts) = scene_count_curve(&hashes, &self.cfg.threshold_grid);
        let outcome = segment(&hashes, &self.cfg.threshold_grid)?;
        Ok(SegmentationStage {
            threshold: outcome.threshold,
            taus,
            scene_counts,
            initial: outcome.segmentation,
        })
    }

    fn caption_stage(&self, v: &VideoEntry, seg: &SceneSegmentation) -> Result<CaptionStage> {
        if let Some(rel) = &v.captions {
            let path = self.manifest.resolve(rel);
            let doc = load_captions(&path)?;
            match doc.scene_captions_for(seg) {
                Some(scenes) => {
                    return Ok(CaptionStage {
                        backend: if doc.backend.is_empty() {
                            "file".into()
                        } else {
                            doc.backend
                        },
                        global: doc.global,
                        scenes,
                    })
                }
                None => tracing::warn!(
                    video = %v.id,
                    "caption file {} does not match the scene intervals; captioning again",
                    path.display()
                ),
            }
        }
        let client = self.caption_client(v)?;
        let opts = CaptionOptions {
            fps: v.fps,
            batch_size: self.cfg.caption_batch_size,
            retry: self.cfg.retry(),
            concurrency: self.cfg.concurrency,
        };
        let scenes = caption_scenes(client.as_ref(), &v.id, seg, &opts, self.cache.as_ref())?;
        let global = caption_video(client.as_ref(), &v.id, v.n_frames, &opts, self.cache.as_ref())?;
        Ok(CaptionStage {
            backend: client.backend_id(),
            global,
            scenes,
        })
    }

    fn new_work<'m>(&self, entry: &'m VideoEntry, run_id: &str) -> Result<VideoWork<'m>> {
        Ok(VideoWork {
            entry,
            record: RunRecord {
                run_id: run_id.to_string(),
                video_id: entry.id.clone(),
                dataset: self.manifest.dataset,
                fps: entry.fps,
                n_frames: entry.n_frames,
                config: self.cfg.clone(),
                user_mean_annotation: entry.user_mean()?,
                segmentation: None,
                refined: None,
                captions: None,
                scores: None,
                frames: None,
                summary: None,
                eval: None,
            },
            embeddings: None,
            timings: BTreeMap::new(),
        })
    }

    /// Segment, refine and caption up to `target`.
    fn early_stages(&self, work: &mut VideoWork<'_>, target: Stage) -> Result<()> {
        let v = work.entry;
        let id = v.id.clone();
        let seg = timed(&mut work.timings, Stage::Segment, || self.segment_stage(v))
            .map_err(|e| e.in_stage("segment", &id))?;
        let initial = seg.initial.clone();
        work.record.segmentation = Some(seg);
        if target < Stage::Refine {
            return Ok(());
        }
        let start = Instant::now();
        let refined = if self.cfg.refine {
            self.embeddings(work)
                .and_then(|emb| refine_short_scenes(&initial, &emb, self.cfg.min_scene_frames))
                .map_err(|e| e.in_stage("refine", &id))?
        } else {
            initial
        };
        work.timings.insert("refine".into(), start.elapsed().as_millis() as u64);
        work.record.refined = Some(refined.clone());
        if target < Stage::Caption {
            return Ok(());
        }
        let caps = timed(&mut work.timings, Stage::Caption, || self.caption_stage(v, &refined))
            .map_err(|e| e.in_stage("caption", &id))?;
        work.record.captions = Some(caps);
        Ok(())
    }

    fn pseudo_label<'s>(
        &'s self,
        works: &mut BTreeMap<String, VideoWork<'s>>,
        run_id: &str,
    ) -> Result<PseudoLabelOutcome> {
        let annotated: Vec<String> = self
            .manifest
            .videos
            .iter()
            .filter(|v| !v.annotations.is_empty())
            .map(|v| v.id.clone())
            .collect();
        if annotated.is_empty() {
            return Ok(PseudoLabelOutcome {
                videos: Vec::new(),
                note: Some("no annotated videos; pseudo labels skipped".into()),
            });
        }
        let chosen = sample_pseudo_videos(&annotated, self.cfg.pseudo_label_ratio, self.cfg.seed)?;
        let mut videos = Vec::new();
        for id in &chosen {
            let entry = self.manifest.video(id)?;
            let mut scratch;
            let work = match works.get_mut(id) {
                Some(w) if w.record.captions.is_some() => w,
                _ => {
                    scratch = self.new_work(entry, run_id)?;
                    self.early_stages(&mut scratch, Stage::Caption)?;
                    &mut scratch
                }
            };
            let inner = || -> Result<Option<PseudoVideo>> {
                let gt = FrameAnnotations::new(work.record.user_mean_annotation.clone().expect("annotated"))?;
                let seg = work.record.refined.as_ref().expect("refined");
                let scores = segment_scores(&gt, seg)?;
                let caps = &work.record.captions.as_ref().expect("captioned").scenes;
                let exemplars = select_exemplars(&scores, caps, self.cfg.exemplars)?;
                if exemplars.high.is_empty() {
                    tracing::warn!(video = %id, "single-scene video gives no exemplars; skipped for pseudo labels");
                    return Ok(None);
                }
                Ok(Some(PseudoVideo {
                    video_id: id.clone(),
                    segment_scores: scores.scores,
                    exemplars,
                }))
            };
            if let Some(p) = inner().map_err(|e| e.in_stage("pseudolabel", id))? {
                videos.push(p);
            }
        }
        Ok(PseudoLabelOutcome { videos, note: None })
    }

    /// One LLM exchange with retries on transport errors and unusable replies.
    fn ask<T>(
        &self,
        client: &dyn LlmClient,
        prompt: &str,
        namespace: &str,
        parse: impl Fn(&str) -> Result<T>,
    ) -> Result<(T, String)> {
        let key = vec![
            content_hash(&[prompt]),
            client.model_id(),
            self.cfg.temperature.to_string(),
        ];
        if let Some(text) = self.cache.as_ref().and_then(|c| c.get(namespace, &key)) {
            if let Ok(v) = parse(&text) {
                return Ok((v, text));
            }
        }
        let ((value, text), _) = self
            .cfg
            .retry()
            .run(|_| {
                let text = client.send(prompt, self.cfg.temperature)?;
                parse(&text).map(|v| (v, text))
            })
            .map_err(|(e, _)| e)?;
        if let Some(c) = &self.cache {
            c.put(namespace, &key, &text)?;
        }
        Ok((value, text))
    }

    fn mine_reasons(&self, pseudo: &PseudoLabelOutcome, base: &Rubric, out: &Path) -> Result<(MinedReasons, Rubric)> {
        let client = self.llm_client(base)?;
        let mut reasons = BTreeMap::new();
        for p in &pseudo.videos {
            let prompt = build_reason_prompt(&p.exemplars)?;
            let (triple, _) = self
                .ask(client.as_ref(), &prompt, "reasons", parse_reason_json)
                .map_err(|e| e.in_stage("mine-reasons", &p.video_id))?;
            reasons.insert(p.video_id.clone(), triple);
        }
        if reasons.is_empty() {
            return Ok((
                MinedReasons {
                    reasons,
                    rubric_source: base.name.clone(),
                    fallback_reason: Some("no reasons mined".into()),
                },
                base.clone(),
            ));
        }
        let triples: Vec<ReasonTriple> = reasons.values().cloned().collect();
        let prompt = build_rubric_prompt(&triples, self.manifest.dataset.as_str())?;
        let synthesized = self.ask(client.as_ref(), &prompt, "rubrics", Rubric::from_response);
        let (mined, rubric) = match synthesized {
            Ok((rubric, text)) => {
                std::fs::write(out.join("rubric_synthesis.txt"), &text).map_err(|e| Error::io(out, e))?;
                (
                    MinedReasons {
                        reasons,
                        rubric_source: "synthesized".into(),
                        fallback_reason: None,
                    },
                    rubric,
                )
            }
            Err(e) if !e.is_backend() => {
                tracing::warn!("synthesized rubric unusable ({e}); using `{}`", base.name);
                (
                    MinedReasons {
                        reasons,
                        rubric_source: base.name.clone(),
                        fallback_reason: Some(e.to_string()),
                    },
                    base.clone(),
                )
            }
            Err(e) => return Err(e.in_stage("mine-reasons", "<dataset>")),
        };
        Ok((mined, rubric))
    }

    fn score_stage(&self, work: &VideoWork<'_>, rubric: &Rubric, client: &dyn LlmClient) -> Result<ScoreStage> {
        let caps = work.record.captions.as_ref().ok_or(Error::StageMissing("caption"))?;
        let opts = ScoringOptions {
            temperature: self.cfg.temperature,
            retry: self.cfg.retry(),
            concurrency: self.cfg.concurrency,
            contextual: self.cfg.contextual,
        };
        let scores = score_scenes(
            client,
            &caps.scenes,
            &caps.global,
            rubric,
            work.entry.preference.as_deref(),
            &opts,
            self.cache.as_ref(),
        )?;
        Ok(ScoreStage {
            rubric: rubric.name.clone(),
            rubric_hash: content_hash(&[serde_json::to_string(rubric).expect("rubric serializes")]),
            model: client.model_id(),
            scores,
        })
    }

    fn frames_stage(&self, work: &mut VideoWork<'_>) -> Result<FrameStage> {
        let seg = work.record.refined.clone().ok_or(Error::StageMissing("refine"))?;
        let scores = work.record.scores.as_ref().ok_or(Error::StageMissing("score"))?;
        let raw: Vec<f64> = scores.scores.iter().map(|s| f64::from(s.value)).collect();
        let mode = self.cfg.normalization_for(self.manifest.dataset);
        let scene_values = normalize(&raw, mode)?;
        let z0 = inherit(&scene_values, &seg)?;
        let z1 = cosine_smooth(&z0, &seg)?;
        let (sched, weights, final_scores) = if self.cfg.frame_weighting {
            let emb = self.embeddings(work)?;
            let sched = match self.cfg.schedule_override {
                Some(s) => s,
                None => schedule(work.entry.duration_seconds(), self.cfg.short_video_seconds)?,
            };
            let w = frame_weights(&emb, &seg, work.entry.fps, &sched, self.cfg.seed)?;
            let fin = combine(&z1, &w)?.values;
            (Some(sched), Some(w), fin)
        } else {
            (None, None, z1.values.clone())
        };
        Ok(FrameStage {
            normalization: mode,
            scene_values,
            inherited: z0.values,
            smoothed: z1.values,
            schedule: sched,
            weights,
            final_scores,
        })
    }

    fn oracle_shot_budget(&self, v: &VideoEntry, n_shots: usize) -> usize {
        let sizes: Vec<usize> = v
            .annotations
            .iter()
            .filter_map(|a| a.shots.as_ref().map(BTreeSet::len))
            .collect();
        if sizes.is_empty() {
            ((self.cfg.budget * n_shots as f64).round() as usize).min(n_shots)
        } else {
            let mean = sizes.iter().sum::<usize>() as f64 / sizes.len() as f64;
            (mean.round() as usize).min(n_shots)
        }
    }

    fn select_stage(&self, work: &VideoWork<'_>) -> Result<SummaryStage> {
        let v = work.entry;
        let frames = work.record.frames.as_ref().ok_or(Error::StageMissing("frames"))?;
        let (unit, seg, capacity, chosen) = if self.manifest.dataset == DatasetTag::Qfvs {
            let shots = v.qfvs_shots()?;
            let shot_scores = shot_scores_from_frames(&frames.final_scores, &shots)?;
            let budget = self.oracle_shot_budget(v, shots.len());
            let chosen = greedy_shot_select(&shot_scores, budget)?;
            (SelectionUnit::Shot, shots, budget, chosen)
        } else {
            let seg = work.record.refined.clone().ok_or(Error::StageMissing("refine"))?;
            let capacity = self.cfg.budget().capacity(v.n_frames)?;
            let means = shot_scores_from_frames(&frames.final_scores, &seg)?;
            let lengths: Vec<usize> = seg.ranges().map(|r| r.len()).collect();
            let values: Vec<f64> = means.iter().zip(&lengths).map(|(m, &l)| m * l as f64).collect();
            let chosen = knapsack_select(&values, &lengths, capacity)?;
            (SelectionUnit::Scene, seg, capacity, chosen)
        };
        if chosen.is_empty() {
            tracing::warn!(video = %v.id, capacity, "no unit fits the budget; the summary is empty");
        }
        let selected_frames: Vec<(usize, usize)> = chosen.iter().map(|&i| seg.intervals()[i]).collect();
        Ok(SummaryStage {
            unit,
            capacity,
            selected_units: chosen.into_iter().collect(),
            n_selected_frames: selected_frames.iter().map(|(a, b)| b - a).sum(),
            selected_frames,
        })
    }

    fn eval_stage(&self, work: &VideoWork<'_>) -> Result<Option<EvalStage>> {
        let v = work.entry;
        if v.annotations.is_empty() {
            return Ok(None);
        }
        let frames = work.record.frames.as_ref().ok_or(Error::StageMissing("frames"))?;
        let predicted = work.record.summary_mask().ok_or(Error::StageMissing("select"))?;
        let ref_seg = match v.reference_segments()? {
            Some(s) => s,
            None => work.record.refined.clone().ok_or(Error::StageMissing("refine"))?,
        };
        let mut per_user = Vec::new();
        for a in &v.annotations {
            let result = if let (Some(oracle), DatasetTag::Qfvs) = (&a.shots, self.manifest.dataset) {
                let shots = v.qfvs_shots()?;
                let shot_scores = shot_scores_from_frames(&frames.final_scores, &shots)?;
                let mine = greedy_shot_select(&shot_scores, oracle.len().min(shots.len()))?;
                let as_mask = |s: &BTreeSet<usize>| (0..shots.len()).map(|i| s.contains(&i)).collect::<Vec<_>>();
                precision_recall_f1(&as_mask(&mine), &as_mask(oracle))?
            } else {
                let reference = match &a.keyshots {
                    Some(k) => k.iter().map(|&x| x == 1).collect(),
                    None => gt_to_keyshots(&v.frame_labels(a)?, &ref_seg, self.cfg.budget())?,
                };
                precision_recall_f1(&predicted, &reference)?
            };
            per_user.push(UserEval {
                user: a.user.clone(),
                result,
            });
        }
        let aggregation = self.manifest.dataset.aggregation();
        let f1s: Vec<f64> = per_user.iter().map(|u| u.result.f1).collect();
        Ok(Some(EvalStage {
            aggregation,
            f1: aggregate_users(&f1s, aggregation)?,
            per_user,
        }))
    }

    fn late_stages(
        &self,
        work: &mut VideoWork<'_>,
        target: Stage,
        rubric: &Rubric,
        client: &dyn LlmClient,
    ) -> Result<()> {
        let id = work.entry.id.clone();
        let start = Instant::now();
        let scores = self
            .score_stage(work, rubric, client)
            .map_err(|e| e.in_stage("score", &id))?;
        work.timings.insert("score".into(), start.elapsed().as_millis() as u64);
        work.record.scores = Some(scores);
        if target < Stage::Frames {
            return Ok(());
        }
        let start = Instant::now();
        let frames = self.frames_stage(work).map_err(|e| e.in_stage("frames", &id))?;
        work.timings.insert("frames".into(), start.elapsed().as_millis() as u64);
        work.record.frames = Some(frames);
        if target < Stage::Select {
            return Ok(());
        }
        let start = Instant::now();
        let summary = self.select_stage(work).map_err(|e| e.in_stage("select", &id))?;
        work.timings.insert("select".into(), start.elapsed().as_millis() as u64);
        work.record.summary = Some(summary);
        if target < Stage::Eval {
            return Ok(());
        }
        let start = Instant::now();
        let eval = self.eval_stage(work).map_err(|e| e.in_stage("eval", &id))?;
        work.timings.insert("eval".into(), start.elapsed().as_millis() as u64);
        work.record.eval = eval;
        Ok(())
    }

    fn dataset_eval(
        &self,
        works: &BTreeMap<String, VideoWork<'_>>,
        excluded: &BTreeSet<String>,
    ) -> Result<Option<DatasetEval>> {
        let per_video_f1: BTreeMap<String, f64> = works
            .iter()
            .filter_map(|(id, w)| w.record.eval.as_ref().map(|e| (id.clone(), e.f1)))
            .collect();
        if per_video_f1.is_empty() {
            return Ok(None);
        }
        let ids: Vec<String> = per_video_f1.keys().cloned().collect();
        let eligible: Vec<&String> = ids.iter().filter(|i| !excluded.contains(*i)).collect();
        let (splits, split_means, mean_f1) = if eligible.is_empty() {
            // Every evaluated video was used for pseudo labels: report the plain mean.
            let mean = per_video_f1.values().sum::<f64>() / per_video_f1.len() as f64;
            (None, None, mean)
        } else {
            let spec = SplitSpec::generate(&ids, excluded, self.cfg.n_splits, self.cfg.seed)?;
            let per_split: Vec<Vec<f64>> = spec
                .test_ids
                .iter()
                .map(|split| split.iter().map(|id| per_video_f1[id]).collect())
                .collect();
            let means = per_split
                .iter()
                .map(|s| s.iter().sum::<f64>() / s.len() as f64)
                .collect();
            let avg = split_average(&per_split, &spec)?;
            (Some(spec), Some(means), avg)
        };
        Ok(Some(DatasetEval {
            per_video_f1,
            excluded: excluded.iter().cloned().collect(),
            splits,
            split_means,
            mean_f1,
        }))
    }

    /// Execute the pipeline up to `opts.target` and persist the results under `opts.out_dir`.
    pub fn run(&self, opts: &RunOptions) -> Result<RunSummary> {
        let out = &opts.out_dir;
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let run_id = self.run_id(opts);
        let ids: Vec<String> = match &opts.video {
            Some(id) => vec![self.manifest.video(id)?.id.clone()],
            None => self.manifest.ids(),
        };
        let target = opts.target;
        let mut timings: Timings = BTreeMap::new();

        let mut works: BTreeMap<String, VideoWork<'_>> = BTreeMap::new();
        for id in &ids {
            let mut work = self.new_work(self.manifest.video(id)?, &run_id)?;
            self.early_stages(&mut work, target.min(Stage::Caption))?;
            works.insert(id.clone(), work);
        }

        let base_rubric = self.cfg.load_rubric(self.manifest.dataset)?;
        let wants_scores = target >= Stage::Score;
        let do_pseudo =
            matches!(target, Stage::Pseudolabel | Stage::MineReasons) || (wants_scores && self.cfg.pseudo_label);
        let do_mine = target == Stage::MineReasons || (wants_scores && self.cfg.pseudo_label);
        let mut pseudo_ids = None;
        let mut rubric = base_rubric.clone();
        if do_pseudo {
            let start = Instant::now();
            let pseudo = self.pseudo_label(&mut works, &run_id)?;
            write_json(&out.join("pseudolabel.json"), &pseudo)?;
            pseudo_ids = Some(pseudo.videos.iter().map(|p| p.video_id.clone()).collect::<Vec<_>>());
            if do_mine {
                let (mined, r) = self.mine_reasons(&pseudo, &base_rubric, out)?;
                write_json(&out.join("reasons.json"), &mined)?;
                rubric = r;
            }
            timings
                .entry("_dataset".into())
                .or_default()
                .insert("pseudolabel".into(), start.elapsed().as_millis() as u64);
        }

        if wants_scores {
            write_json(&out.join("rubric.json"), &rubric)?;
            let client = self.llm_client(&rubric)?;
            for work in works.values_mut() {
                self.late_stages(work, target, &rubric, client.as_ref())?;
            }
        }

        let excluded: BTreeSet<String> = pseudo_ids.iter().flatten().cloned().collect();
        let evaluation = if target >= Stage::Eval && opts.video.is_none() {
            self.dataset_eval(&works, &excluded)?
        } else {
            None
        };

        for (id, work) in &works {
            let dir = out.join("videos").join(id);
            write_json(&dir.join("record.json"), &work.record)?;
            if let (Some(caps), Some(seg)) = (&work.record.captions, &work.record.refined) {
                let doc = CaptionDocument::new(id, &caps.backend, &caps.global, seg, &caps.scenes)?;
                write_json(&dir.join("captions.json"), &doc)?;
            }
            if target == Stage::Pipeline {
                emit_plot_data(&work.record, &dir.join("plot")).map_err(|e| e.in_stage("plot-data", id))?;
            }
            timings.insert(id.clone(), work.timings.clone());
        }

        let summary = RunSummary {
            run_id,
            dataset: self.manifest.dataset,
            target,
            seed: self.cfg.seed,
            videos: ids,
            pseudo_label_videos: pseudo_ids,
            rubric: wants_scores.then(|| rubric.name.clone()),
            evaluation,
        };
        write_json(&out.join("run.json"), &summary)?;
        write_json(&out.join("timings.json"), &timings)?;
        Ok(summary)
    }
}

/// Re-emit plot files for every record under `out/videos`.
pub fn emit_plots_from_records(out: &Path, video: Option<&str>) -> Result<Vec<PathBuf>> {
    let videos = out.join("videos");
    let mut ids: Vec<String> = match video {
        Some(v) => vec![v.to_string()],
        None => std::fs::read_dir(&videos)
            .map_err(|e| Error::io(&videos, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("record.json").is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect(),
    };
    ids.sort();
    let mut written = Vec::new();
    for id in ids {
        let dir = videos.join(&id);
        let record = crate::io::record::load_record(&dir.join("record.json"))?;
        written.extend(emit_plot_data(&record, &dir.join("plot")).map_err(|e| e.in_stage("plot-data", &id))?);
    }
    Ok(written)
}
