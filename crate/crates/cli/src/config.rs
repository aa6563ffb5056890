//! Run configuration: a JSON file, command-line overrides on top, then
//! validation into a fully-resolved plan.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use geneig::synth::{CcaMode, SpectrumSpec};
use geneig::{CcaSpec, GenEigConfig, GeneigSpec, SolverConfig};
use serde::Deserialize;

/// Failures split by exit code: usage problems (bad or missing
/// configuration) exit 2, everything else (I/O, parse, numerical) exits 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Run(m) => write!(f, "{m}"),
        }
    }
}

impl From<geneig::Error> for CliError {
    fn from(e: geneig::Error) -> Self {
        match e {
            geneig::Error::InvalidConfig(_) | geneig::Error::InvalidHint(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Geneig,
    Cca,
    Bench,
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Gd,
    Agd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Theory,
    Practical,
}

/// Spectrum request for synthetic pairs: a literal eigenvalue list or the
/// (k, ρ, γ) triple that plants an exact gap and spread.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumChoice {
    Explicit(Vec<f64>),
    Planted { k: usize, rho: f64, gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CcaModeChoice {
    PopulationExact,
    Sampled,
}

/// Synthetic-instance request. Eigenpair runs need `d` and `spectrum`;
/// CCA runs need `n`, `d1`, `d2`, and `correlations`. `seed` defaults to
/// the run seed.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub d: Option<usize>,
    pub kappa_b: Option<f64>,
    pub spectrum: Option<SpectrumChoice>,
    pub n: Option<usize>,
    pub d1: Option<usize>,
    pub d2: Option<usize>,
    pub correlations: Option<Vec<f64>>,
    pub mode: Option<CcaModeChoice>,
    pub mix_x: Option<bool>,
    pub seed: Option<u64>,
}

/// The JSON config file; every field optional so flags and defaults can
/// fill the gaps. Unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub mode: Option<Mode>,
    pub k: Option<usize>,
    pub epsilon: Option<f64>,
    pub solver: Option<SolverChoice>,
    pub schedule: Option<Schedule>,
    pub rho_hint: Option<f64>,
    pub gamma_hint: Option<f64>,
    pub fixed_delta: Option<f64>,
    pub max_outer: Option<usize>,
    pub max_inner: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub a: Option<PathBuf>,
    pub b: Option<PathBuf>,
    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub reg_x: Option<f64>,
    pub reg_y: Option<f64>,
    pub out: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// Fully-resolved run plan after file + flag merge and validation.
#[derive(Debug)]
pub struct RunConfig {
    pub mode: Mode,
    pub k: usize,
    pub epsilon: f64,
    pub solver: SolverChoice,
    pub schedule: Schedule,
    pub rho_hint: Option<f64>,
    pub gamma_hint: Option<f64>,
    pub fixed_delta: Option<f64>,
    pub max_outer: usize,
    pub max_inner: usize,
    pub seed: u64,
    pub threads: usize,
    pub a: Option<PathBuf>,
    pub b: Option<PathBuf>,
    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub reg_x: Option<f64>,
    pub reg_y: Option<f64>,
    pub out: PathBuf,
    pub synthetic: Option<SyntheticSpec>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl RunConfig {
    /// Merge precedence: flag > file > default.
    pub fn resolve(file: RunConfigFile, flags: RunConfigFile) -> Result<Self, CliError> {
        let mode = flags
            .mode
            .or(file.mode)
            .ok_or_else(|| usage("mode is required (--mode or \"mode\" in the config file)"))?;
        let cfg = RunConfig {
            mode,
            k: flags.k.or(file.k).unwrap_or(1),
            epsilon: flags.epsilon.or(file.epsilon).unwrap_or(1e-6),
            solver: flags.solver.or(file.solver).unwrap_or(SolverChoice::Agd),
            schedule: flags
                .schedule
                .or(file.schedule)
                .unwrap_or(Schedule::Practical),
            rho_hint: flags.rho_hint.or(file.rho_hint),
            gamma_hint: flags.gamma_hint.or(file.gamma_hint),
            fixed_delta: flags.fixed_delta.or(file.fixed_delta),
            max_outer: flags.max_outer.or(file.max_outer).unwrap_or(1000),
            max_inner: flags.max_inner.or(file.max_inner).unwrap_or(200_000),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            threads: flags.threads.or(file.threads).unwrap_or(1),
            a: flags.a.or(file.a),
            b: flags.b.or(file.b),
            x: flags.x.or(file.x),
            y: flags.y.or(file.y),
            reg_x: flags.reg_x.or(file.reg_x),
            reg_y: flags.reg_y.or(file.reg_y),
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from(".")),
            synthetic: flags.synthetic.or(file.synthetic),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.k == 0 {
            return Err(usage("k must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(usage(format!("epsilon {} must lie in (0, 1)", self.epsilon)));
        }
        if let Some(d) = self.fixed_delta {
            if !(d > 0.0 && d < 1.0) {
                return Err(usage(format!("delta {d} must lie in (0, 1)")));
            }
        }
        if self.threads == 0 {
            return Err(usage("threads must be at least 1"));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(usage("iteration budgets must be at least 1"));
        }
        match self.schedule {
            Schedule::Theory => {
                if self.fixed_delta.is_some() {
                    return Err(usage(
                        "delta sets the practical schedule's tolerance; it conflicts with --schedule theory",
                    ));
                }
            }
            Schedule::Practical => {
                if self.rho_hint.is_some() || self.gamma_hint.is_some() {
                    return Err(usage(
                        "rho/gamma drive the theory schedule; they conflict with --schedule practical",
                    ));
                }
            }
        }
        match self.mode {
            Mode::Geneig => {
                let files = self.a.is_some() || self.b.is_some();
                if files && (self.a.is_none() || self.b.is_none()) {
                    return Err(usage("geneig mode needs both --a and --b"));
                }
                if files && self.synthetic.is_some() {
                    return Err(usage(
                        "give either --a/--b files or a synthetic block, not both",
                    ));
                }
                if !files {
                    let synth = self
                        .synthetic
                        .as_ref()
                        .ok_or_else(|| usage("geneig mode needs --a/--b files or a synthetic block"))?;
                    synth_geneig_spec(synth, self.seed)?;
                }
            }
            Mode::Cca => {
                let files = self.x.is_some() || self.y.is_some();
                if files && (self.x.is_none() || self.y.is_none()) {
                    return Err(usage("cca mode needs both --x and --y"));
                }
                if files && self.synthetic.is_some() {
                    return Err(usage(
                        "give either --x/--y files or a synthetic block, not both",
                    ));
                }
                if !files {
                    let synth = self
                        .synthetic
                        .as_ref()
                        .ok_or_else(|| usage("cca mode needs --x/--y files or a synthetic block"))?;
                    synth_cca_spec(synth, self.seed)?;
                }
            }
            Mode::Bench => {
                if self.a.is_some() || self.x.is_some() {
                    return Err(usage(
                        "bench mode measures first-hit cost against a known subspace and only runs synthetic instances",
                    ));
                }
                if let Some(synth) = &self.synthetic {
                    synth_geneig_spec(synth, self.seed)?;
                }
            }
            Mode::Selftest => {}
        }
        Ok(())
    }

    /// The eigeniteration config this plan asks for. Theory needs ρ —
    /// given explicitly or inferred from a synthetic instance's known
    /// spectrum (the `auto_*` arguments); the core rejects a missing γ for
    /// k > 1 itself. Practical keeps its default inner tolerance unless
    /// `fixed_delta` overrides it.
    pub fn geneig_config(
        &self,
        auto_rho: Option<f64>,
        auto_gamma: Option<f64>,
    ) -> Result<GenEigConfig, CliError> {
        let mut g = match self.schedule {
            Schedule::Theory => {
                let rho = self.rho_hint.or(auto_rho).ok_or_else(|| {
                    usage("the theory schedule requires --rho (no planted spectrum to infer it from)")
                })?;
                let mut g = GenEigConfig::theory(self.epsilon, rho);
                g.gamma_hint = self.gamma_hint.or(auto_gamma);
                g
            }
            Schedule::Practical => {
                let mut g = GenEigConfig::practical(self.epsilon);
                if let Some(d) = self.fixed_delta {
                    g.fixed_delta = Some(d);
                }
                g
            }
        };
        g.max_outer_iterations = self.max_outer;
        g.rng_seed = self.seed;
        Ok(g)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            method: match self.solver {
                SolverChoice::Gd => geneig::SolveMethod::Gd,
                SolverChoice::Agd => geneig::SolveMethod::Agd,
            },
            max_inner_iterations: self.max_inner,
            ..SolverConfig::default()
        }
    }
}

/// Checks and converts the synthetic block for an eigenpair run.
pub fn synth_geneig_spec(synth: &SyntheticSpec, run_seed: u64) -> Result<GeneigSpec, CliError> {
    let d = synth
        .d
        .ok_or_else(|| usage("synthetic eigenpair instances need \"d\""))?;
    let spectrum = match synth
        .spectrum
        .as_ref()
        .ok_or_else(|| usage("synthetic eigenpair instances need \"spectrum\""))?
    {
        SpectrumChoice::Explicit(values) => SpectrumSpec::Explicit(values.clone()),
        SpectrumChoice::Planted { k, rho, gamma } => SpectrumSpec::Planted {
            k: *k,
            rho: *rho,
            gamma: *gamma,
        },
    };
    Ok(GeneigSpec {
        d,
        spectrum,
        kappa_b: synth.kappa_b.unwrap_or(1.0),
        seed: synth.seed.unwrap_or(run_seed),
    })
}

/// Checks and converts the synthetic block for a CCA run.
pub fn synth_cca_spec(synth: &SyntheticSpec, run_seed: u64) -> Result<CcaSpec, CliError> {
    let n = synth
        .n
        .ok_or_else(|| usage("synthetic CCA instances need \"n\""))?;
    let d1 = synth
        .d1
        .ok_or_else(|| usage("synthetic CCA instances need \"d1\""))?;
    let d2 = synth
        .d2
        .ok_or_else(|| usage("synthetic CCA instances need \"d2\""))?;
    let correlations = synth
        .correlations
        .clone()
        .ok_or_else(|| usage("synthetic CCA instances need \"correlations\""))?;
    Ok(CcaSpec {
        n,
        d1,
        d2,
        correlations,
        mode: match synth.mode.unwrap_or(CcaModeChoice::PopulationExact) {
            CcaModeChoice::PopulationExact => CcaMode::PopulationExact,
            CcaModeChoice::Sampled => CcaMode::Sampled,
        },
        mix_x: synth.mix_x.unwrap_or(false),
        seed: synth.seed.unwrap_or(run_seed),
    })
}
