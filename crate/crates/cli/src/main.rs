mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use neofuse::aggregation::{Scheme, DS_EPSILON, DS_MAX_ITERATIONS};

/// Distributed neonatal seizure detection toolbox.
///
/// Outputs default to paths under $NEOFUSE_OUT (or the working directory).
#[derive(Debug, Parser)]
#[command(name = "neofuse", version, propagate_version = true)]
struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design the Chebyshev type II band-pass and write its sections and response.
    FilterDesign(FilterDesignArgs),
    /// Preprocess one recording and list its 16 s segments with labels.
    Segment(SegmentArgs),
    /// Train a local detector, or with --pred a stacking model.
    Train(TrainArgs),
    /// Score every kept segment of the given recordings with each model.
    Predict(PredictArgs),
    /// Fuse detector probabilities into one consensus score per segment.
    Aggregate(AggregateArgs),
    /// Segment- and event-based metrics of a consensus against expert annotations.
    Evaluate(EvaluateArgs),
    /// Run the leave-one-subject-out experiment on a synthetic cohort.
    Simulate(SimulateArgs),
    /// Summarize a simulation's per-patient table into trend tables.
    Report(ReportArgs),
    /// Write a synthetic cohort as recordings plus an annotation CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct FilterDesignArgs {
    #[arg(long, default_value_t = 6)]
    order: usize,
    /// Lower pass-band edge in Hz.
    #[arg(long, default_value_t = 0.5)]
    low: f64,
    /// Upper pass-band edge in Hz.
    #[arg(long, default_value_t = 16.0)]
    high: f64,
    /// Stop-band attenuation in dB.
    #[arg(long, default_value_t = 40.0)]
    atten: f64,
    /// Sampling rate in Hz.
    #[arg(long, default_value_t = 256.0)]
    rate: f64,
    /// Rows of the frequency-response table, from 0 Hz to Nyquist.
    #[arg(long, default_value_t = 513)]
    points: usize,
    /// Output directory [default: $NEOFUSE_OUT/filter].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// Recording header (`.json`) or its stem.
    #[arg(long)]
    recording: PathBuf,
    /// Annotation CSV holding this patient's expert tracks.
    #[arg(long)]
    annotations: PathBuf,
    /// Output directory [default: $NEOFUSE_OUT/segments].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training recordings; repeat the flag for several patients.
    #[arg(long, num_args = 1.., required_unless_present = "pred", conflicts_with = "pred")]
    recording: Vec<PathBuf>,
    /// Annotation CSVs covering every training patient.
    #[arg(long, num_args = 1.., required = true)]
    annotations: Vec<PathBuf>,
    /// Fit a stacking model on these predictions instead of training a detector.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Detector id stored in the model.
    #[arg(long, default_value = "local0")]
    id: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Attention inner size.
    #[arg(long, default_value_t = 8)]
    inner_size: usize,
    /// Inverse L2 strength of the stacking fit.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Output model JSON [default: $NEOFUSE_OUT/model.json].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Detector model JSON; repeat for an ensemble.
    #[arg(long, num_args = 1.., required = true)]
    model: Vec<PathBuf>,
    /// Recordings to score; repeat for several patients.
    #[arg(long, num_args = 1.., required = true)]
    recording: Vec<PathBuf>,
    /// Output predictions CSV [default: $NEOFUSE_OUT/predictions.csv].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AggregateArgs {
    #[arg(long, value_parser = parse_scheme)]
    scheme: Scheme,
    /// Predictions CSV (segment_id,detector_id,probability).
    #[arg(long)]
    pred: PathBuf,
    /// Stacking model JSON, required by wmean.
    #[arg(long, required_if_eq("scheme", "wmean"))]
    stacking: Option<PathBuf>,
    /// Label threshold, inclusive.
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// EM convergence tolerance on the log-likelihood.
    #[arg(long, default_value_t = DS_EPSILON)]
    eps: f64,
    /// EM iteration cap.
    #[arg(long, default_value_t = DS_MAX_ITERATIONS)]
    k_max: usize,
    /// Run one EM over all segments instead of one per patient.
    #[arg(long)]
    pooled: bool,
    /// Output consensus CSV [default: $NEOFUSE_OUT/consensus.csv].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Consensus CSV (segment_id,score,label).
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Output metrics JSON [default: $NEOFUSE_OUT/metrics.json].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Experiment JSON with `cohort` and `experiment` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from the full grid: 38 patients, k = 3..10, ten runs.
    #[arg(long, conflicts_with = "config")]
    full_grid: bool,
    /// Ensemble sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long)]
    runs: Option<usize>,
    /// Experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    patients: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Output directory [default: $NEOFUSE_OUT/simulation].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory written by `simulate`.
    #[arg(long)]
    input: PathBuf,
    /// Output directory [default: $NEOFUSE_OUT/report].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Experiment JSON; only its `cohort` section is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    patients: Option<usize>,
    /// Recording length in seconds.
    #[arg(long)]
    duration: Option<u32>,
    /// Cohort seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: $NEOFUSE_OUT/cohort].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: neofuse::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return ExitCode::from(1);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| commands::run(cli.command, cli.verbose)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
