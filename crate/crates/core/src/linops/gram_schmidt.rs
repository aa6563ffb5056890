//! Gram–Schmidt orthonormalization in the B-inner product.

use ndarray::{Array2, ArrayView2};

use super::{check_dim, LinearOperator, SpdOperator};
use crate::error::{Error, Result};

/// A pivot below this fraction of the first column's B-norm is treated as
/// rank deficiency.
const PIVOT_REL_TOL: f64 = 1e-12;

/// A set of k vectors orthonormal under a specific B-metric, tagged with
/// that metric's identity token.
#[derive(Debug, Clone)]
pub struct Subspace {
    basis: Array2<f64>,
    metric_id: u64,
}

impl Subspace {
    /// Wraps columns the caller asserts are already B-orthonormal.
    pub fn assume_orthonormal(basis: Array2<f64>, metric: &SpdOperator) -> Self {
        Subspace {
            basis,
            metric_id: metric.metric_id(),
        }
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    pub fn metric_id(&self) -> u64 {
        self.metric_id
    }
}

/// Result of [`gs_b`]: the orthonormalized subspace, the k×k upper
/// triangular factor with positive diagonal satisfying Q R = W, and the
/// cached products B·Q.
pub struct GsOutcome {
    pub q: Subspace,
    pub r: Array2<f64>,
    /// Column j is B applied to basis column j — a byproduct of the
    /// factorization, exposed so callers can form Gram matrices against Q
    /// without further operator applications.
    pub bq: Array2<f64>,
}

/// Modified Gram–Schmidt in the B-inner product with one unconditional
/// re-orthogonalization pass per column.
///
/// Projection coefficients from both passes accumulate into R, so Q R = W
/// holds to rounding. B-products against finished columns reuse cached
/// B·qᵢ vectors; the only operator work is exactly **one B-application per
/// column**.
///
/// Errors with [`Error::DegenerateBasis`] when a pivot B-norm falls below
/// 1e-12 of the first column's B-norm.
pub fn gs_b(b: &SpdOperator, w: ArrayView2<f64>) -> Result<GsOutcome> {
    let (d, k) = w.dim();
    check_dim(b.dim(), d)?;
    if k == 0 || k > d {
        return Err(Error::InvalidConfig(format!(
            "gs_b needs 1 <= k <= d, got k={k}, d={d}"
        )));
    }

    let mut q = Array2::<f64>::zeros((d, k));
    let mut bq = Array2::<f64>::zeros((d, k));
    let mut r = Array2::<f64>::zeros((k, k));
    let mut pivot_ref = 0.0f64;

    for j in 0..k {
        let mut v = w.column(j).to_owned();
        for _pass in 0..2 {
            for i in 0..j {
                let c = bq.column(i).dot(&v);
                r[[i, j]] += c;
                v.scaled_add(-c, &q.column(i));
            }
        }
        let bv = b.apply(v.view())?;
        let quad = v.dot(&bv);
        let scale = v.dot(&v).sqrt() * bv.dot(&bv).sqrt();
        if quad < -1e-12 * scale {
            return Err(Error::NotSpd(format!(
                "pivot quadratic form {quad:e} is negative"
            )));
        }
        let rjj = quad.max(0.0).sqrt();
        if j == 0 {
            if !(rjj.is_finite() && rjj > 0.0) {
                return Err(Error::DegenerateBasis {
                    column: 0,
                    pivot: rjj,
                    threshold: 0.0,
                });
            }
            pivot_ref = rjj;
        } else if rjj < PIVOT_REL_TOL * pivot_ref {
            return Err(Error::DegenerateBasis {
                column: j,
                pivot: rjj,
                threshold: PIVOT_REL_TOL * pivot_ref,
            });
        }
        r[[j, j]] = rjj;
        q.column_mut(j).assign(&(&v / rjj));
        bq.column_mut(j).assign(&(&bv / rjj));
    }

    Ok(GsOutcome {
        q: Subspace {
            basis: q,
            metric_id: b.metric_id(),
        },
        r,
        bq,
    })
}
