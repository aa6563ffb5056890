//! Command-line driver for the generalized-eigenvector and CCA library.
//!
//! A run is described by an optional JSON config file plus flag overrides
//! (flag > file > default). Every computational mode writes a trace CSV
//! and a summary JSON into --out; synthetic instances also know their
//! answer, so their traces carry convergence metrics.
//!
//! Exit codes: 0 success, 1 runtime failure (I/O, parse, numerical),
//! 2 configuration/usage error.

mod config;
mod modes;
mod selftest;
mod trace;

use std::path::PathBuf;

use clap::Parser;

use config::{CliError, Mode, RunConfig, RunConfigFile, Schedule, SolverChoice, SyntheticSpec};

#[derive(Parser)]
#[command(
    name = "geneig",
    about = "Top-k generalized eigenvectors and canonical correlations via inexact warm-started power iteration",
    long_about = None
)]
struct Cli {
    /// JSON run configuration; flags below override its fields.
    config: Option<PathBuf>,
    /// geneig | cca | bench | selftest
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Number of eigenpairs / canonical pairs.
    #[arg(long)]
    k: Option<usize>,
    /// Target sin θ against the true subspace.
    #[arg(long = "eps")]
    epsilon: Option<f64>,
    /// Inner linear-system solver: gd | agd.
    #[arg(long, value_enum)]
    solver: Option<SolverChoice>,
    /// Inner-tolerance schedule: theory (needs rho) | practical.
    #[arg(long, value_enum)]
    schedule: Option<Schedule>,
    /// Relative eigengap hint ρ = 1 − |λ_{k+1}|/|λ_k| for the theory schedule.
    #[arg(long = "rho")]
    rho_hint: Option<f64>,
    /// Spread hint γ = |λ₁|/|λ_k| for the theory schedule at k > 1.
    #[arg(long = "gamma")]
    gamma_hint: Option<f64>,
    /// Constant inner tolerance for the practical schedule.
    #[arg(long = "delta")]
    fixed_delta: Option<f64>,
    /// Outer iteration cap.
    #[arg(long = "max-outer")]
    max_outer: Option<usize>,
    /// Inner (per-solve) iteration cap.
    #[arg(long = "max-inner")]
    max_inner: Option<usize>,
    /// Seed for every random draw in the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the column solves (default 1, deterministic).
    #[arg(long)]
    threads: Option<usize>,
    /// Left operator A, Matrix Market (geneig mode).
    #[arg(long)]
    a: Option<PathBuf>,
    /// Metric B, Matrix Market (geneig mode).
    #[arg(long)]
    b: Option<PathBuf>,
    /// View-X samples, CSV rows (cca mode).
    #[arg(long)]
    x: Option<PathBuf>,
    /// View-Y samples, CSV rows (cca mode).
    #[arg(long)]
    y: Option<PathBuf>,
    /// Ridge added to S_xx (default: trace-scaled).
    #[arg(long = "reg-x")]
    reg_x: Option<f64>,
    /// Ridge added to S_yy (default: trace-scaled).
    #[arg(long = "reg-y")]
    reg_y: Option<f64>,
    /// Output directory for trace/summary/result files.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cli {
    fn into_overrides(self) -> (Option<PathBuf>, RunConfigFile) {
        let overrides = RunConfigFile {
            mode: self.mode,
            k: self.k,
            epsilon: self.epsilon,
            solver: self.solver,
            schedule: self.schedule,
            rho_hint: self.rho_hint,
            gamma_hint: self.gamma_hint,
            fixed_delta: self.fixed_delta,
            max_outer: self.max_outer,
            max_inner: self.max_inner,
            seed: self.seed,
            threads: self.threads,
            a: self.a,
            b: self.b,
            x: self.x,
            y: self.y,
            reg_x: self.reg_x,
            reg_y: self.reg_y,
            out: self.out,
            synthetic: None::<SyntheticSpec>,
        };
        (self.config, overrides)
    }
}

fn real_main(cli: Cli) -> Result<(), CliError> {
    let (config_path, overrides) = cli.into_overrides();
    let file = match &config_path {
        Some(p) => RunConfigFile::load(p)?,
        None => RunConfigFile::default(),
    };
    let cfg = RunConfig::resolve(file, overrides)?;

    // One pool for the whole process; k column solves fan out over it.
    // The default single thread keeps runs deterministic byte-for-byte.
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
        .map_err(|e| CliError::Run(format!("thread pool: {e}")))?;

    if cfg.mode != Mode::Selftest {
        std::fs::create_dir_all(&cfg.out)
            .map_err(|e| CliError::Run(format!("{}: {e}", cfg.out.display())))?;
    }
    match cfg.mode {
        Mode::Geneig => modes::run_geneig(&cfg),
        Mode::Cca => modes::run_cca(&cfg),
        Mode::Bench => modes::run_bench(&cfg),
        Mode::Selftest => selftest::run_selftest(),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = real_main(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
