use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use vsum_core::io::pipeline::emit_plots_from_records;
use vsum_core::io::synthetic::{demo_videos, write_dataset};
use vsum_core::io::{load_config, load_manifest, DatasetTag, Pipeline, RunConfig, RunOptions, Stage};
use vsum_core::{Error, Result};

#[derive(Parser)]
#[command(name = "vsum", version, about = "Rubric-guided video summarization")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset manifest (JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Restrict the run to one video id.
    #[arg(long, global = true)]
    video: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Summary budget as a fraction of the video length.
    #[arg(long, global = true)]
    budget: Option<f64>,
    /// Use the offline caption and LLM backends.
    #[arg(long, global = true)]
    mock: bool,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetArg {
    Summe,
    Tvsum,
    Qfvs,
}

impl From<DatasetArg> for DatasetTag {
    fn from(d: DatasetArg) -> Self {
        match d {
            DatasetArg::Summe => DatasetTag::Summe,
            DatasetArg::Tvsum => DatasetTag::Tvsum,
            DatasetArg::Qfvs => DatasetTag::Qfvs,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Initial scene boundaries from perceptual hashes.
    Segment,
    /// Merge short scenes by embedding similarity.
    Refine,
    /// Scene and whole-video captions.
    Caption,
    /// Segment-level pseudo labels and exemplars on a sample of videos.
    Pseudolabel,
    /// Reasons from pseudo-label exemplars and the synthesized rubric.
    MineReasons,
    /// Rubric scores for every scene.
    Score,
    /// Frame-level importance curves.
    Frames,
    /// Summary selection under the budget.
    Select,
    /// F1 against user annotations.
    Eval,
    /// Every stage, including plot data.
    Pipeline,
    /// Plot-ready CSV files from existing run records.
    PlotData,
    /// Write a synthetic dataset (frames, embeddings, manifest).
    #[command(hide = true)]
    Synth {
        #[arg(long, default_value_t = 3)]
        videos: usize,
        #[arg(long, value_enum, default_value = "tvsum")]
        dataset: DatasetArg,
    },
}

impl Command {
    fn stage(&self) -> Option<Stage> {
        Some(match self {
            Command::Segment => Stage::Segment,
            Command::Refine => Stage::Refine,
            Command::Caption => Stage::Caption,
            Command::Pseudolabel => Stage::Pseudolabel,
            Command::MineReasons => Stage::MineReasons,
            Command::Score => Stage::Score,
            Command::Frames => Stage::Frames,
            Command::Select => Stage::Select,
            Command::Eval => Stage::Eval,
            Command::Pipeline => Stage::Pipeline,
            Command::PlotData | Command::Synth { .. } => return None,
        })
    }
}

fn build_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(b) = g.budget {
        cfg.budget = b;
    }
    if g.mock {
        cfg.force_mock();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_stage(g: &GlobalArgs, stage: Stage) -> Result<()> {
    let cfg = build_config(g)?;
    let manifest_path = g
        .manifest
        .as_deref()
        .ok_or_else(|| Error::Config("--manifest is required".into()))?;
    let manifest = load_manifest(manifest_path)?;
    let pipeline = Pipeline::new(cfg, manifest)?;
    let summary = pipeline.run(&RunOptions {
        target: stage,
        video: g.video.clone(),
        out_dir: g.out.clone(),
    })?;
    println!(
        "run {} ({}): {} video(s) -> {}",
        summary.run_id,
        stage.name(),
        summary.videos.len(),
        g.out.display()
    );
    if let Some(eval) = &summary.evaluation {
        println!("mean F1 {:.4}", eval.mean_f1);
    }
    Ok(())
}

fn synth(out: &Path, n: usize, dataset: DatasetTag, seed: u64) -> Result<()> {
    let videos = demo_videos(n, seed)?;
    let manifest = write_dataset(out, dataset, &videos)?;
    println!("{}", manifest.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::PlotData => {
            let files = emit_plots_from_records(&g.out, g.video.as_deref())?;
            println!("{} plot file(s) written", files.len());
            Ok(())
        }
        Command::Synth { videos, dataset } => synth(&g.out, *videos, (*dataset).into(), g.seed.unwrap_or(0)),
        cmd => run_stage(g, cmd.stage().expect("stage command")),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
