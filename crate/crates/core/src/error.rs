//! Structured errors shared across the crate.

use ndarray::Array1;

use crate::solvers::SolveReport;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Partial outcome attached to a budget-exceeded solve: the iterate after
/// spending the whole inner budget, plus the report for that partial run.
#[derive(Debug, Clone)]
pub struct PartialSolve {
    pub iterate: Array1<f64>,
    pub report: SolveReport,
}

#[derive(Debug)]
pub enum Error {
    /// Operand shapes disagree.
    DimensionMismatch { expected: usize, found: usize },
    /// A configuration value is outside its documented domain.
    InvalidConfig(String),
    /// A spectral hint (rho, gamma, lambda bounds) is missing or invalid.
    InvalidHint(String),
    /// Gram-Schmidt hit a pivot below the rank-deficiency threshold.
    DegenerateBasis {
        column: usize,
        pivot: f64,
        threshold: f64,
    },
    /// A quadratic form or eigenvalue certifies the operator is not SPD.
    NotSpd(String),
    /// The iteration-count formula asks for more inner iterations than the
    /// configured budget allows; carries the partial iterate.
    BudgetExceeded {
        needed: usize,
        budget: usize,
        partial: Box<PartialSolve>,
    },
    /// Dense oracle refused an input above its dimension cap.
    DimensionCap { dim: usize, cap: usize },
    /// A k-by-k system was numerically singular.
    SingularSmallSystem(String),
    /// The dense eigensolver failed to reach its off-diagonal target.
    NoConvergence(String),
    /// The CCA projection stayed rank-deficient after all retries.
    ProjectionDegenerate { attempts: usize },
    /// A ratio metric has a zero denominator (e.g. reference TCC = 0).
    UndefinedMetric(String),
    Io(std::io::Error),
    /// Input file violated its format; line is 1-based.
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::InvalidHint(msg) => write!(f, "invalid hint: {msg}"),
            Error::DegenerateBasis {
                column,
                pivot,
                threshold,
            } => write!(
                f,
                "degenerate basis: column {column} pivot {pivot:e} below threshold {threshold:e}"
            ),
            Error::NotSpd(msg) => write!(f, "operator is not SPD: {msg}"),
            Error::BudgetExceeded { needed, budget, .. } => write!(
                f,
                "inner budget exceeded: formula needs {needed} iterations, budget is {budget}"
            ),
            Error::DimensionCap { dim, cap } => {
                write!(f, "dense oracle dimension {dim} exceeds cap {cap}")
            }
            Error::SingularSmallSystem(msg) => write!(f, "singular small system: {msg}"),
            Error::NoConvergence(msg) => write!(f, "no convergence: {msg}"),
            Error::ProjectionDegenerate { attempts } => write!(
                f,
                "projection stayed rank-deficient after {attempts} attempts"
            ),
            Error::UndefinedMetric(msg) => write!(f, "undefined metric: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
            Error::Parse {
                path,
                line,
                message,
            } => write!(f, "{path}:{line}: {message}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
