use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tuckercomp::config::{DEFAULT_ALPHA, DEFAULT_LAMBDA, DEFAULT_MAX_ITERS, DEFAULT_MU0, DEFAULT_RHO, DEFAULT_TOL, STRICT_TOL};
use tuckercomp::{Bandwidth, SolverConfig, SolverKind};

use crate::error::{CliError, CliResult};

/// Default α grid of the sensitivity sweep.
pub const SWEEP_ALPHAS: [f64; 7] = [0.01, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9];
/// Default λ grid of the sensitivity sweep.
pub const SWEEP_LAMBDAS: [f64; 6] = [0.1, 0.5, 1.0, 10.0, 1e2, 1e3];

#[derive(Debug, Parser)]
#[command(name = "tuckercomp", version, about = "Low-rank Tucker tensor completion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Complete a partially observed tensor.
    Complete(CompleteArgs),
    /// Run a grid of (alpha, lambda) completions.
    Sweep(SweepArgs),
    /// Generate a smooth synthetic tensor from Gaussian bumps.
    Synth(SynthArgs),
    /// Sample an observation mask with an exact observed count.
    Mask(MaskArgs),
    /// Evaluate an estimate against ground truth.
    Metrics(MetricsArgs),
}

/// Input data and solver settings shared by `complete` and `sweep`.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// Observed tensor (DTF1, or binary PPM by `.ppm` extension).
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// Observation mask (DTF1 of zeros and ones).
    #[arg(long, value_name = "PATH")]
    pub mask: PathBuf,
    /// Ground truth; adds RSE to the trace and a quality report.
    #[arg(long, value_name = "PATH")]
    pub truth: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value = "palm")]
    pub solver: String,
    #[arg(long, default_value_t = DEFAULT_MU0)]
    pub mu0: f64,
    #[arg(long, default_value_t = DEFAULT_RHO)]
    pub rho: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Use the tighter stopping tolerance instead of `--tol`.
    #[arg(long, conflicts_with = "tol")]
    pub strict: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Smooth modes, 1-based (`1,2`), or `all` / `none`.
    #[arg(long, default_value = "all")]
    pub gamma: String,
    /// Laplacian kernel scale: `auto`, `median` or a positive number.
    #[arg(long, default_value = "auto")]
    pub bandwidth: String,
    /// Step with 1.1 times each Lipschitz constant.
    #[arg(long)]
    pub inflate_lipschitz: bool,
    /// Clip core and factor entries to max(NU, max |observed|).
    #[arg(long, value_name = "NU")]
    pub clamp: Option<f64>,
    /// Keep wall-clock fields in the report and trace.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated alpha grid.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Comma-separated lambda grid.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Cells run concurrently; also capped by TUCKERCOMP_THREADS.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [30, 30, 30])]
    pub dims: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub bumps: usize,
    #[arg(long, default_value_t = 0.2)]
    pub width: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    /// Take the mask shape from this tensor.
    #[arg(long = "like", value_name = "PATH", conflicts_with = "dims", required_unless_present = "dims")]
    pub like: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Sample ratio in [0, 1].
    #[arg(long)]
    pub sr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long, value_name = "PATH")]
    pub est: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub truth: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub mask: PathBuf,
    /// Also write the report here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

/// `1,2` → `[0, 1]`; `all` → every mode; `none` → no smoothness.
pub fn parse_gamma(s: &str) -> CliResult<Option<Vec<usize>>> {
    match s.trim().to_ascii_lowercase().as_str() {
        "all" => Ok(None),
        "none" | "" => Ok(Some(Vec::new())),
        list => list
            .split(',')
            .map(|m| match m.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n - 1),
                _ => Err(CliError::config(format!("invalid smooth mode {m:?} (modes are 1-based)"))),
            })
            .collect::<CliResult<Vec<_>>>()
            .map(Some),
    }
}

pub fn parse_bandwidth(s: &str) -> CliResult<Bandwidth> {
    match s.trim().to_ascii_lowercase().as_str() {
        "auto" => Ok(Bandwidth::Auto),
        "median" => Ok(Bandwidth::Median),
        v => v
            .parse::<f64>()
            .map(Bandwidth::Fixed)
            .map_err(|_| CliError::config(format!("invalid bandwidth {s:?} (auto, median or a number)"))),
    }
}

impl RunArgs {
    pub fn config(&self, alpha: f64, lambda: f64) -> CliResult<SolverConfig> {
        let solver: SolverKind = self.solver.parse()?;
        let config = SolverConfig {
            solver,
            alpha,
            lambda,
            mu0: self.mu0,
            rho: self.rho,
            tol: if self.strict { STRICT_TOL } else { self.tol },
            max_iters: self.max_iters,
            seed: self.seed,
            gamma: parse_gamma(&self.gamma)?,
            bandwidth: parse_bandwidth(&self.bandwidth)?,
            inflate_lipschitz: self.inflate_lipschitz,
            clamp: self.clamp,
        };
        config.validate()?;
        Ok(config)
    }
}
