//! `gmm-reparam`: synthesize demonstrations, fit a mixture, generalize it to
//! new endpoints, regress trajectories, and score them.
//!
//! Exit status is 0 on success, 2 when the input is invalid and 1 for any
//! other failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gmm_reparam::scene::Variation;

/// An input problem detected by the CLI itself (bad flag value, unreadable
/// config, and so on).
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Debug, Parser)]
#[command(name = "gmm-reparam", version, about)]
struct Cli {
    /// JSON run configuration; flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic demonstrations and a manifest.
    Synth(SynthArgs),
    /// Fit a Gaussian mixture to demonstration CSVs.
    Fit(FitArgs),
    /// Retarget a model to new start and goal poses.
    Generalize(GeneralizeArgs),
    /// Regress a trajectory from a source or retargeted model.
    Regress(RegressArgs),
    /// Score a trajectory against a task and scene.
    Evaluate(EvaluateArgs),
    /// Run seeded randomized trials and summarize them.
    Benchmark(BenchmarkArgs),
    /// Render trajectories to SVG and export plot data.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for demo CSVs and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Scene JSON; defaults to the built-in desk shelf.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub demos: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub noise_mm: Option<f64>,
    #[arg(long)]
    pub noise_deg: Option<f64>,
    /// Transport arc height, m.
    #[arg(long)]
    pub lift: Option<f64>,
    /// Sample rate, Hz.
    #[arg(long)]
    pub rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Demonstration CSV files.
    #[arg(long, num_args = 1.., required = true)]
    pub demos: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of mixture components.
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// End of the grasp phase, s (default 1).
    #[arg(long)]
    pub grasp_end: Option<f64>,
    /// Start of the release phase, s (default: 1 s before the end).
    #[arg(long)]
    pub release_start: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GeneralizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Start pose `x,y,z,rx,ry,rz` (m, rad).
    #[arg(long, allow_hyphen_values = true)]
    pub start: String,
    /// Goal pose `x,y,z,rx,ry,rz` (m, rad).
    #[arg(long, allow_hyphen_values = true)]
    pub goal: String,
    /// Move the means only and keep the source covariances.
    #[arg(long)]
    pub ablate_covariance: bool,
    /// Retargeted model JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the regressed trajectory CSV here.
    #[arg(long)]
    pub traj: Option<PathBuf>,
    #[arg(long)]
    pub rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    /// Source or retargeted model JSON.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Trajectory CSV to score.
    #[arg(long)]
    pub traj: PathBuf,
    /// Model providing the phase schedule and, by default, the reference path.
    #[arg(long)]
    pub model: PathBuf,
    /// Task start pose; defaults to the model's first component.
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<String>,
    /// Task goal pose; defaults to the model's last component.
    #[arg(long, allow_hyphen_values = true)]
    pub goal: Option<String>,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Reference path for the shape metric.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Report JSON; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// translational or combined.
    #[arg(long)]
    pub mode: Option<Variation>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for summary.csv and trials.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Run only the means-only variant.
    #[arg(long, conflicts_with = "compare")]
    pub ablate_covariance: bool,
    /// Run both the full and the means-only variant.
    #[arg(long)]
    pub compare: bool,
    /// Reference path for the shape metric; defaults to the model's regression.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Run trials one after another instead of on the thread pool.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Trajectory CSV files.
    #[arg(long, num_args = 1.., required = true)]
    pub traj: Vec<PathBuf>,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Plot-data CSV; with several inputs, `_<i>` is appended to the stem.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<gmm_reparam::Error>() {
        Some(e) if e.is_validation() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config::RunConfig::load(cli.config.as_deref()).and_then(|cfg| match cli.command {
        Command::Synth(a) => commands::synth(&cfg, a),
        Command::Fit(a) => commands::fit(&cfg, a),
        Command::Generalize(a) => commands::generalize(&cfg, a),
        Command::Regress(a) => commands::regress(&cfg, a),
        Command::Evaluate(a) => commands::evaluate(&cfg, a),
        Command::Benchmark(a) => commands::benchmark(&cfg, a),
        Command::Plot(a) => commands::plot(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
