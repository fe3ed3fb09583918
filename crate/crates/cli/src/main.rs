//! `layerforge` command-line tool.
//!
//! Exit codes: 0 on success, 1 when a command ran and failed, 2 for bad
//! flags or configuration. Progress and diagnostics go to stderr; results
//! go to stdout or to the files named by flags.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use layerforge::geometry::CanvasSize;

#[derive(Debug, Parser)]
#[command(name = "layerforge", version, about = "Synthetic layered design dataset tool")]
struct Cli {
    /// Log more (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compose a dataset from asset pools.
    Generate(GenerateArgs),
    /// Layer-count histogram and range shares of a dataset index.
    Stats(StatsArgs),
    /// Score predicted boxes against ground truth.
    EvalBoxes(EvalBoxesArgs),
    /// Score layer reconstructions against a generated dataset.
    EvalRecon(EvalReconArgs),
    /// Refine raw captions with a vision-language model endpoint.
    Refine(RefineArgs),
    /// Write detector training pairs for every sample of an index.
    DetectorPairs(DetectorPairsArgs),
    /// Turn detector outputs into decomposition inference inputs.
    InferenceInputs(InferenceInputsArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    pub config: PathBuf,
    #[arg(long)]
    pub count: Option<u64>,
    /// Overrides composition.global_seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// `distribution` (1-5, 6-10, ..., 26-52), `evaluation` (1-7, 8-9,
    /// 10-12, 13-35) or a list such as `1-3,4-52`.
    #[arg(long, default_value = "distribution")]
    pub bins: String,
    /// Ranges whose share of all samples is reported.
    #[arg(long = "share", default_values_t = ["6-15".to_string(), "1-20".to_string()])]
    pub shares: Vec<String>,
    /// Print the result as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalBoxesArgs {
    /// JSONL of `{"id": ..., "boxes": [[x0, y0, x1, y1], ...]}`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Same shape as `--pred`; its ids define the evaluated samples.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value = "1024x1024")]
    pub canvas: CanvasSize,
    #[arg(long)]
    pub json: bool,
    /// Also write per-sample rows as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalReconArgs {
    #[arg(long)]
    pub pred_dir: PathBuf,
    #[arg(long)]
    pub gt_dir: PathBuf,
    /// Layer-count bins of the per-bin breakdown, as for `stats`.
    #[arg(long, default_value = "evaluation")]
    pub bins: String,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Chat-completion URL. Falls back to the config file, then to
    /// LAYERFORGE_VLM_ENDPOINT.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Keep the raw caption when the endpoint is missing or keeps failing.
    #[arg(long)]
    pub fallback: bool,
    /// Read `[refiner]` settings from a run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    /// Requests in flight at once.
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DetectorPairsArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Defaults to `detector_pairs.jsonl` next to the index.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferenceInputsArgs {
    /// JSONL with `id`, `image` and either `output` (raw detector text) or
    /// the parsed `whole_caption` and `boxes`.
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "1024x1024")]
    pub canvas: CanvasSize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::Generate(a) => commands::generate::run(a),
        Command::Stats(a) => commands::stats::run(a),
        Command::EvalBoxes(a) => commands::eval::boxes(a),
        Command::EvalRecon(a) => commands::eval::recon(a),
        Command::Refine(a) => commands::refine::run(a),
        Command::DetectorPairs(a) => commands::export::detector_pairs(a),
        Command::InferenceInputs(a) => commands::export::inference_inputs(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
