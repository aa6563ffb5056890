//! Linear operators, the B-metric, and the primitives built on them.
//!
//! Everything downstream accesses matrices only through [`LinearOperator`]:
//! a matrix-vector product plus bookkeeping (dimension, a per-application
//! cost weight, and a tally of applications used for work accounting).

mod dense;
mod gram_schmidt;
mod random;
mod sparse;
mod spectral;

pub use dense::{DenseSymmetricOperator, DiagonalOperator, Rank1Operator};
pub use gram_schmidt::{gs_b, GsOutcome, Subspace};
pub use random::{random_gaussian_matrix, random_unit_b};
pub use sparse::{CsrMatrix, SparseSymmetricMatrix};
pub use spectral::{estimate_extreme_eigs, SpectralEstimate};

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::solvers::SpectralSource;

/// Symmetric linear operator accessed only through matrix-vector products.
///
/// `apply` increments the operator's application tally by exactly one;
/// `nnz` is the per-application cost weight (stored entries for explicit
/// matrices, effective pass length for implicit ones) used by the
/// nnz-weighted flop proxy.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;
    fn nnz(&self) -> usize;
    fn apply_count(&self) -> u64;
    fn apply(&self, v: ArrayView1<f64>) -> Result<Array1<f64>>;

    /// Column-wise application; tallies one application per column.
    fn apply_matrix(&self, w: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros(w.raw_dim());
        for (j, col) in w.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.apply(col)?);
        }
        Ok(out)
    }
}

/// Application tally shared by the concrete operators.
#[derive(Debug, Default)]
pub(crate) struct ApplyCounter(AtomicU64);

impl ApplyCounter {
    pub(crate) fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

static NEXT_METRIC_ID: AtomicU64 = AtomicU64::new(1);

/// Seed for the internal spectral probe; fixed so that estimation inside a
/// solve is deterministic without threading a seed through solver configs.
const SPECTRAL_PROBE_SEED: u64 = 0x5eed_0001;

/// An SPD operator: a [`LinearOperator`] plus optional spectral hints and a
/// cache for estimated extreme eigenvalues.
///
/// Positive definiteness is the caller's contract; it is spot-checked where
/// cheap (quadratic forms in `b_norm`, pivots in `gs_b`) and violations
/// surface as [`Error::NotSpd`].
pub struct SpdOperator {
    base: Arc<dyn LinearOperator>,
    lambda_max_hint: Option<f64>,
    lambda_min_hint: Option<f64>,
    estimate: OnceLock<SpectralEstimate>,
    id: u64,
}

impl SpdOperator {
    pub fn new(base: Arc<dyn LinearOperator>) -> Self {
        SpdOperator {
            base,
            lambda_max_hint: None,
            lambda_min_hint: None,
            estimate: OnceLock::new(),
            id: NEXT_METRIC_ID.fetch_add(1, Ordering::Relaxed),
        }
    }

    /// Wraps `base` with known extreme eigenvalues; solvers then skip
    /// estimation entirely.
    pub fn with_hints(base: Arc<dyn LinearOperator>, lambda_max: f64, lambda_min: f64) -> Result<Self> {
        if !(lambda_max.is_finite() && lambda_min.is_finite()) || lambda_min <= 0.0 || lambda_max < lambda_min {
            return Err(Error::InvalidHint(format!(
                "spectral hints must satisfy 0 < lambda_min <= lambda_max, got ({lambda_max}, {lambda_min})"
            )));
        }
        let mut op = SpdOperator::new(base);
        op.lambda_max_hint = Some(lambda_max);
        op.lambda_min_hint = Some(lambda_min);
        Ok(op)
    }

    pub fn base(&self) -> &Arc<dyn LinearOperator> {
        &self.base
    }

    /// Identity token tying [`Subspace`] values to the metric they are
    /// orthonormal under. Stable across clones.
    pub fn metric_id(&self) -> u64 {
        self.id
    }

    pub fn lambda_max_hint(&self) -> Option<f64> {
        self.lambda_max_hint
    }

    pub fn lambda_min_hint(&self) -> Option<f64> {
        self.lambda_min_hint
    }

    /// Resolves (lambda_max, lambda_min, confident) per the source policy:
    /// hints are honored when present; `Estimate` falls back to a cached
    /// power-iteration estimate for any missing side, `Hints` errors.
    pub fn resolve_bounds(&self, source: SpectralSource, estimation_iters: usize) -> Result<(f64, f64, bool)> {
        if let (Some(mx), Some(mn)) = (self.lambda_max_hint, self.lambda_min_hint) {
            return Ok((mx, mn, true));
        }
        match source {
            SpectralSource::Hints => Err(Error::InvalidHint(
                "spectral hints required but not present on the operator".into(),
            )),
            SpectralSource::Estimate => {
                let est = self.spectral_estimate(estimation_iters)?;
                let mx = self.lambda_max_hint.unwrap_or(est.lambda_max);
                let mn = self.lambda_min_hint.unwrap_or(est.lambda_min);
                if mn <= 0.0 || mx < mn {
                    return Err(Error::NotSpd(format!(
                        "estimated extreme eigenvalues ({mx}, {mn}) are not usable as SPD bounds"
                    )));
                }
                Ok((mx, mn, est.converged))
            }
        }
    }

    /// The cached spectral estimate, computing it on first use. The first
    /// call fixes the iteration budget for the lifetime of the cache.
    pub fn spectral_estimate(&self, estimation_iters: usize) -> Result<SpectralEstimate> {
        if let Some(est) = self.estimate.get() {
            return Ok(est.clone());
        }
        let est = estimate_extreme_eigs(self.base.as_ref(), estimation_iters, SPECTRAL_PROBE_SEED)?;
        let _ = self.estimate.set(est.clone());
        Ok(est)
    }
}

impl Clone for SpdOperator {
    fn clone(&self) -> Self {
        SpdOperator {
            base: Arc::clone(&self.base),
            lambda_max_hint: self.lambda_max_hint,
            lambda_min_hint: self.lambda_min_hint,
            estimate: self.estimate.clone(),
            id: self.id,
        }
    }
}

impl LinearOperator for SpdOperator {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn nnz(&self) -> usize {
        self.base.nnz()
    }

    fn apply_count(&self) -> u64 {
        self.base.apply_count()
    }

    fn apply(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.base.apply(v)
    }
}

/// `uᵀ B v`; costs one application of B.
pub fn b_dot(b: &dyn LinearOperator, u: ArrayView1<f64>, v: ArrayView1<f64>) -> Result<f64> {
    check_dim(b.dim(), u.len())?;
    let bv = b.apply(v)?;
    Ok(u.dot(&bv))
}

/// `sqrt(vᵀ B v)`; costs one application of B.
///
/// A quadratic form below `-1e-12` relative to its natural scale certifies
/// B is not SPD and errors; small negative rounding is clamped to zero.
pub fn b_norm(b: &dyn LinearOperator, v: ArrayView1<f64>) -> Result<f64> {
    check_dim(b.dim(), v.len())?;
    let bv = b.apply(v)?;
    let q = v.dot(&bv);
    let scale = v.dot(&v).sqrt() * bv.dot(&bv).sqrt();
    if q < -1e-12 * scale {
        return Err(Error::NotSpd(format!("quadratic form {q:e} is negative")));
    }
    Ok(q.max(0.0).sqrt())
}
