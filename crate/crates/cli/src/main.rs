//! `spherevlad`: data preparation, training, retrieval and diagnostics.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 numerical failure, 130 interrupted.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "spherevlad", version, about = "Viewpoint-invariant LiDAR place recognition")]
struct Cli {
    /// Where to write the run manifest (default: next to the command's output).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic world as submap archives.
    Synth(SynthArgs),
    /// Project submaps to spherical range panoramas.
    Project(ProjectArgs),
    /// Train a model on a submap directory.
    Train(TrainArgs),
    /// Describe the database frames of a split and write an index file.
    Index(IndexArgs),
    /// Retrieve database neighbours for query frames.
    Query(QueryArgs),
    /// Recall metrics plus optional yaw sweep, SNR, ablation and benchmark.
    Eval(EvalArgs),
    /// Centroid activity and SNR from a model or an assignment file.
    Snr(SnrArgs),
    /// Per-frame projection and inference time.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionArg {
    Float32,
    Float64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// B₀=4, a few channels; for tests.
    Tiny,
    /// B₀=16.
    Desk,
    /// B₀=32, 64×64 panoramas.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    #[value(name = "keypose_rest", alias = "keypose-rest")]
    KeyposeRest,
    Revisit,
    #[value(name = "cross_recording", alias = "cross-recording")]
    CrossRecording,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SplitArgs {
    /// Query/database protocol.
    #[arg(long, value_enum, default_value = "cross_recording")]
    pub strategy: StrategyKind,
    /// Keypose spacing for `keypose_rest`, metres.
    #[arg(long, default_value_t = 5.0)]
    pub spacing_m: f64,
    /// Revisit radius for `revisit`, metres.
    #[arg(long, default_value_t = 3.0)]
    pub revisit_radius_m: f64,
    /// Frames that must separate a revisit from the earlier pass.
    #[arg(long, default_value_t = 50)]
    pub min_gap_frames: usize,
    /// Database recording for `cross_recording`.
    #[arg(long, default_value_t = 0)]
    pub db_label: usize,
    /// Query recordings for `cross_recording` (default: all others).
    #[arg(long, value_delimiter = ',')]
    pub query_labels: Vec<usize>,
    /// Retrieval success threshold, metres.
    #[arg(long, default_value_t = 5.0)]
    pub threshold_m: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ModelInput {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory of submaps (npz archives, or bin/ply/pcd with poses.txt).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "float64")]
    pub precision: PrecisionArg,
    /// Projection range, metres.
    #[arg(long, default_value_t = 50.0)]
    pub max_range: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// World parameters as JSON or TOML; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub landmarks: Option<usize>,
    #[arg(long)]
    pub loop_radius_m: Option<f64>,
    #[arg(long)]
    pub spacing_m: Option<f64>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ProjectArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub bandwidth: usize,
    #[arg(long, default_value_t = 50.0)]
    pub max_range: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrainArgs {
    /// Training configuration (TOML or JSON); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    pub model: Preset,
    /// `sphere_vlad` or `sphere_vlad_pp`.
    #[arg(long, default_value = "sphere_vlad_pp")]
    pub variant: String,
    #[arg(long)]
    pub no_attention: bool,
    #[arg(long)]
    pub no_batchnorm: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, value_enum)]
    pub precision: Option<PrecisionArg>,
    #[arg(long, default_value_t = 50.0)]
    pub max_range: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct IndexArgs {
    #[command(flatten)]
    pub input: ModelInput,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Index file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct QueryArgs {
    #[command(flatten)]
    pub input: ModelInput,
    #[arg(long)]
    pub index: PathBuf,
    /// Query frame ids (default: every frame not in the index).
    #[arg(long, value_delimiter = ',')]
    pub ids: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub top_n: usize,
    /// Ranked results CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: ModelInput,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Output directory for tables and plots.
    #[arg(long)]
    pub out: PathBuf,
    /// Longest recall@N reported.
    #[arg(long, default_value_t = 25)]
    pub top_n: usize,
    /// Yaw angles in degrees, `start:step:end` or a comma list.
    #[arg(long)]
    pub yaw_sweep: Option<String>,
    /// Query displacement range for the yaw sweep, metres.
    #[arg(long, default_value_t = 1.0)]
    pub noise_m: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub snr: bool,
    #[arg(long, default_value_t = spherevlad::eval::snr::DEFAULT_MIN_ARGMAX_FRACTION)]
    pub min_fraction: f64,
    /// Train and evaluate all four batch-norm × attention variants.
    #[arg(long)]
    pub ablation_table: bool,
    /// Training configuration for the ablation.
    #[arg(long)]
    pub train_config: Option<PathBuf>,
    /// Training submaps for the ablation.
    #[arg(long)]
    pub train_data: Option<PathBuf>,
    #[arg(long)]
    pub bench: bool,
    #[arg(long, default_value_t = 500)]
    pub runs: usize,
    #[arg(long, default_value_t = 10)]
    pub warmup: usize,
    /// Also render SVG plots.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SnrArgs {
    /// CSV assignment matrix, one row per local descriptor.
    #[arg(long, conflicts_with_all = ["checkpoint", "data"])]
    pub assignments: Option<PathBuf>,
    #[arg(long, requires = "data")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, requires = "checkpoint")]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "float64")]
    pub precision: PrecisionArg,
    #[arg(long, default_value_t = 50.0)]
    pub max_range: f64,
    #[arg(long, default_value_t = spherevlad::eval::snr::DEFAULT_MIN_ARGMAX_FRACTION)]
    pub min_fraction: f64,
    /// Output directory for `snr.csv` and the histogram.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plot: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub input: ModelInput,
    #[arg(long, default_value_t = 500)]
    pub runs: usize,
    #[arg(long, default_value_t = 10)]
    pub warmup: usize,
    /// Results CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    manifest::install_interrupt_handler();
    let result = commands::run(cli.command, cli.manifest);
    match result {
        Ok(()) => {
            manifest::finish(manifest::Status::Ok, None);
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = e.code();
            let status = if code == 130 {
                manifest::Status::Interrupted
            } else {
                manifest::Status::Failed
            };
            manifest::finish(status, Some(e.to_string()));
            if code != 130 {
                eprintln!("error: {e}");
            }
            ExitCode::from(code)
        }
    }
}
