mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use roiseg::dataset::{DEFAULT_COPIES, DEFAULT_FOLDS};
use roiseg::pipeline::RoiSize;

use commands::{Context, RunArgs, Subset};
use config::RunConfig;
use failure::{CliResult, Failure};

/// Breast-ultrasound lesion instance segmentation: a box detector feeding
/// per-class segmenters on cropped regions.
#[derive(Debug, Parser)]
#[command(name = "roiseg", version)]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice (required by split, augment, synth).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory [default: config `out`, else ./out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a dataset and write reports/load_report.json.
    Ingest {
        /// Dataset root with benign/, malignant/ and normal/ folders.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Write the stratified 80/10/10 + k-fold manifest to splits/split.json.
    Split {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_FOLDS)]
        folds: usize,
    },
    /// Write the dataset plus augmented copies of every record.
    Augment {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_COPIES)]
        copies: usize,
        /// Split manifest; its test records are copied without augmentation.
        #[arg(long)]
        split: Option<PathBuf>,
        /// Destination dataset root [default: <out>/augmented].
        #[arg(long)]
        dest: Option<PathBuf>,
    },
    /// Generate a synthetic dataset.
    Synth {
        /// Records per class.
        #[arg(long)]
        n: usize,
        /// Image size as WxH [default: 128x128].
        #[arg(long)]
        size: Option<String>,
        /// Destination dataset root [default: <out>/dataset].
        #[arg(long)]
        dest: Option<PathBuf>,
    },
    /// Run detection and segmentation, writing instances/.
    Run {
        #[arg(long)]
        data: Option<PathBuf>,
        /// oracle | external[:<dir>]
        #[arg(long)]
        detector: Option<String>,
        /// oracle | otsu | otsu:bright | fixed:<t> | external[:<dir>]
        #[arg(long)]
        segmenter: Option<String>,
        /// all | test | fold:<i>
        #[arg(long, default_value = "all")]
        subset: Subset,
        /// Split manifest [default: <out>/splits/split.json].
        #[arg(long)]
        split: Option<PathBuf>,
        /// native | WxH
        #[arg(long)]
        roi_size: Option<RoiSize>,
    },
    /// Score instances/ against the ground truth, writing reports/eval.{json,csv}.
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Render image, ground-truth contour and predicted masks to overlays/.
    Overlay {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated image ids [default: every image of the run].
        #[arg(long, value_delimiter = ',')]
        ids: Vec<String>,
    },
}

fn execute(cli: Cli) -> CliResult {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot start {jobs} workers: {e}")))?;
    }
    let out = cli.out.clone().or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Context { config, seed: cli.seed, out };

    match &cli.command {
        Command::Ingest { data } => commands::ingest_cmd(&ctx, data.as_deref()),
        Command::Split { data, folds } => commands::split_cmd(&ctx, data.as_deref(), *folds),
        Command::Augment { data, copies, split, dest } => {
            commands::augment_cmd(&ctx, data.as_deref(), *copies, split.as_deref(), dest.as_deref())
        }
        Command::Synth { n, size, dest } => commands::synth_cmd(&ctx, *n, size.as_deref(), dest.as_deref()),
        Command::Run { data, detector, segmenter, subset, split, roi_size } => commands::run_cmd(
            &ctx,
            RunArgs {
                data: data.as_deref(),
                detector: detector.as_deref(),
                segmenter: segmenter.as_deref(),
                subset: *subset,
                split: split.as_deref(),
                roi_size: *roi_size,
            },
        ),
        Command::Eval { data } => commands::eval_cmd(&ctx, data.as_deref()),
        Command::Overlay { data, ids } => commands::overlay_cmd(&ctx, data.as_deref(), ids),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.exit_code()
        }
    }
}
