//! Plot-ready CSVs for each pipeline stage, plus the boundary lists.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::record::{write_json, RunRecord};
use crate::scene::SceneSegmentation;

pub const PLOT_FILES: [&str; 5] = [
    "01_boundaries_initial.csv",
    "02_boundaries_refined.csv",
    "03_scene_scores.csv",
    "04_smoothed.csv",
    "05_frame_level.csv",
];
pub const BOUNDARY_FILE: &str = "boundaries.json";

#[derive(Serialize)]
struct PlotRow {
    frame_index: usize,
    user_mean_annotation: Option<f64>,
    model_score: Option<f64>,
    scene_index: usize,
}

#[derive(Serialize)]
struct BoundaryLists<'a> {
    threshold: f64,
    initial: Vec<usize>,
    refined: Vec<usize>,
    initial_intervals: &'a [(usize, usize)],
    refined_intervals: &'a [(usize, usize)],
}

fn write_csv(path: &Path, seg: &SceneSegmentation, user: Option<&[f64]>, model: Option<&[f64]>) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for (t, scene) in seg.frame_labels().into_iter().enumerate() {
        w.serialize(PlotRow {
            frame_index: t,
            user_mean_annotation: user.map(|u| u[t]),
            model_score: model.map(|m| m[t]),
            scene_index: scene,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write the five stage files and the boundary lists into `dir`. Boundary
/// stages leave `model_score` empty; the score stages fill it.
pub fn emit_plot_data(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    let seg = record.segmentation.as_ref().ok_or(Error::StageMissing("segment"))?;
    let refined = record.refined.as_ref().ok_or(Error::StageMissing("refine"))?;
    let frames = record.frames.as_ref().ok_or(Error::StageMissing("frames"))?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let user = record.user_mean_annotation.as_deref();
    let paths: Vec<PathBuf> = PLOT_FILES.iter().map(|f| dir.join(f)).collect();
    write_csv(&paths[0], &seg.initial, user, None)?;
    write_csv(&paths[1], refined, user, None)?;
    write_csv(&paths[2], refined, user, Some(&frames.inherited))?;
    write_csv(&paths[3], refined, user, Some(&frames.smoothed))?;
    write_csv(&paths[4], refined, user, Some(&frames.final_scores))?;
    let boundaries = dir.join(BOUNDARY_FILE);
    write_json(
        &boundaries,
        &BoundaryLists {
            threshold: seg.threshold,
            initial: seg.initial.boundaries(),
            refined: refined.boundaries(),
            initial_intervals: seg.initial.intervals(),
            refined_intervals: refined.intervals(),
        },
    )?;
    Ok(paths.into_iter().chain([boundaries]).collect())
}
