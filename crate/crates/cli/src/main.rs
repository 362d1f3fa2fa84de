#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(
    name = "sparse-mdl",
    version,
    about = "MDL sparse wavelet features for time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank wavelet bases by total codelength of the series.
    SelectBasis(SelectBasisArgs),
    /// Per-window sparsity profiles, daily statistics and before/after ratios.
    Features(FeaturesArgs),
    /// Train a typical dictionary and flag atypical windows.
    Detect(DetectArgs),
    /// Complexity, error and total codelength of one window for every k.
    Curve(CurveArgs),
    /// Write a synthetic series and its labels.
    Simulate(SimulateArgs),
}

/// Options shared by every command that reads a series.
#[derive(Args, Clone)]
pub struct RunConfig {
    /// Input CSV with header `timestamp,value`.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Wavelet name, or `auto` to pick the shortest-codelength basis.
    #[arg(long, default_value = "auto")]
    pub wavelet: String,
    /// Window length (power of two).
    #[arg(long, short = 'l', default_value_t = 256, value_parser = parse_window_len)]
    pub l: usize,
    /// Window stride in samples; defaults to the window length.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub stride: Option<u64>,
    /// Bin width in seconds for downsampling; 0 disables it.
    #[arg(long, default_value_t = 10.0)]
    pub bin_seconds: f64,
    /// Samples below this value are treated as sensor artefacts.
    #[arg(long, default_value_t = 30.0)]
    pub min_value: f64,
    /// A fall larger than this between consecutive valid samples is an artefact.
    #[arg(long, default_value_t = 3.0)]
    pub max_drop: f64,
    /// Skip outlier removal.
    #[arg(long)]
    pub no_outliers: bool,
    /// Output directory (created if missing).
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
    /// Recorded in summaries; analysis commands are deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl RunConfig {
    pub fn stride(&self) -> usize {
        self.stride.map_or(self.l, |s| s as usize)
    }
}

fn parse_window_len(s: &str) -> Result<usize, String> {
    let l: usize = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if l < 8 || !l.is_power_of_two() {
        return Err(format!(
            "window length must be a power of two >= 8, got {l}"
        ));
    }
    Ok(l)
}

#[derive(Args)]
pub struct SelectBasisArgs {
    #[command(flatten)]
    pub run: RunConfig,
    /// Comma-separated candidate bases; defaults to the whole library.
    #[arg(long, value_delimiter = ',')]
    pub library: Vec<String>,
}

#[derive(Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub run: RunConfig,
    /// Timestamp (seconds or RFC3339) separating the before and after periods.
    #[arg(long, required = true)]
    pub split: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Tau {
    Cv,
    Fixed(f64),
}

fn parse_tau(s: &str) -> Result<Tau, String> {
    if s.eq_ignore_ascii_case("cv") {
        return Ok(Tau::Cv);
    }
    match s.parse::<f64>() {
        Ok(t) if t >= 0.0 => Ok(Tau::Fixed(t)),
        _ => Err(format!("tau must be 'cv' or a number >= 0, got '{s}'")),
    }
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Direction {
    ShorterInItself,
    Reversed,
}

#[derive(Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub run: RunConfig,
    /// End of the training slice (exclusive); training starts at the first sample.
    #[arg(long)]
    pub train_end: String,
    /// End of the clean validation slice used when `--tau cv`.
    #[arg(long)]
    pub validation_end: Option<String>,
    /// Detection threshold in bits, or `cv` to calibrate on the validation slice.
    #[arg(long, default_value = "cv", value_parser = parse_tau)]
    pub tau: Tau,
    /// Stride used when harvesting training windows.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub train_stride: u64,
    #[arg(long, value_enum, default_value_t = Direction::ShorterInItself)]
    pub direction: Direction,
}

#[derive(Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub run: RunConfig,
    /// Index of the window among the sliding windows.
    #[arg(long, default_value_t = 0)]
    pub window: usize,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SimKind {
    Ar2,
    SparseInBasis,
    ChallengeLike,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SimPerturbation {
    /// The generator's default perturbation.
    Default,
    None,
    VarianceScale,
    ArShift,
    Drift,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON generator spec; overrides the other generator flags.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SimKind::ChallengeLike)]
    pub kind: SimKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample count (ar2).
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Segment length (sparse-in-basis).
    #[arg(long, short = 'l', default_value_t = 256)]
    pub l: usize,
    /// Planted components (sparse-in-basis).
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 20.0)]
    pub snr_db: f64,
    /// Basis for sparse-in-basis.
    #[arg(long, default_value = "db8")]
    pub wavelet: String,
    /// Simulated days (challenge-like).
    #[arg(long)]
    pub days: Option<usize>,
    /// First perturbed day (challenge-like).
    #[arg(long)]
    pub perturbation_day: Option<usize>,
    #[arg(long, value_enum, default_value_t = SimPerturbation::Default)]
    pub perturbation: SimPerturbation,
    /// Variance factor, drift amount, or shifted a1 depending on the perturbation.
    #[arg(long)]
    pub magnitude: Option<f64>,
    #[arg(long, short, default_value = ".")]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SelectBasis(a) => commands::select_basis(a),
        Command::Features(a) => commands::features(a),
        Command::Detect(a) => commands::detect(a),
        Command::Curve(a) => commands::curve(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
