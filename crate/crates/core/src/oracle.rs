//! Dense brute-force reference linear algebra: a Jacobi symmetric
//! eigensolver and the routines built on it (generalized eigendecomposition,
//! small SVD, dense CCA, principal angles, Cholesky solves).
//!
//! Everything here is dependency-free, dimension-capped, and tuned for
//! correctness over speed. The fast paths use these routines only for small
//! k×k subproblems; tests use them as independent ground truth.

use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::cca::{CcaDataset, CcaResult};
use crate::error::{Error, Result};
use crate::linops::{gs_b, DenseSymmetricOperator, SpdOperator};

/// Hard cap on dense-oracle problem size.
pub const DIMENSION_CAP: usize = 2000;

/// Jacobi sweep budget and relative off-diagonal convergence threshold.
const MAX_SWEEPS: usize = 100;
const OFFDIAG_RTOL: f64 = 1e-12;
/// Allowed relative asymmetry in inputs (they are symmetrized internally).
const SYMMETRY_RTOL: f64 = 1e-8;
/// Relative eigenvalue floor below which a metric is rejected as not SPD.
const SPD_REL_FLOOR: f64 = 1e-12;

fn check_cap(d: usize) -> Result<()> {
    if d > DIMENSION_CAP {
        return Err(Error::DimensionCap { dim: d, cap: DIMENSION_CAP });
    }
    Ok(())
}

fn frobenius(m: ArrayView2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Validates approximate symmetry and returns the exactly symmetric part.
fn symmetrized(m: ArrayView2<f64>, what: &str) -> Result<Array2<f64>> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::DimensionMismatch { expected: r, found: c });
    }
    let norm = frobenius(m);
    let mut skew = 0.0f64;
    for i in 0..r {
        for j in (i + 1)..r {
            let e = m[[i, j]] - m[[j, i]];
            skew += 2.0 * e * e;
        }
    }
    if skew.sqrt() > SYMMETRY_RTOL * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidConfig(format!(
            "{what} is not symmetric: skew {:.3e} exceeds {:.1e} of norm {:.3e}",
            skew.sqrt(),
            SYMMETRY_RTOL,
            norm
        )));
    }
    let mut out = Array2::zeros((r, r));
    for i in 0..r {
        out[[i, i]] = m[[i, i]];
        for j in (i + 1)..r {
            let v = 0.5 * (m[[i, j]] + m[[j, i]]);
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    Ok(out)
}

fn offdiag_frobenius(a: &Array2<f64>) -> f64 {
    let d = a.nrows();
    let mut acc = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            acc += 2.0 * a[[i, j]] * a[[i, j]];
        }
    }
    acc.sqrt()
}

/// Cyclic Jacobi on an exactly symmetric matrix. Returns the unsorted
/// eigenvalues (final diagonal) and the accumulated rotations V with
/// A·V = V·diag(vals) to working precision.
fn jacobi_eig(mut a: Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let d = a.nrows();
    let mut v = Array2::eye(d);
    if d <= 1 {
        return Ok((a.diag().to_owned(), v));
    }
    let tol = OFFDIAG_RTOL * frobenius(a.view()).max(f64::MIN_POSITIVE);
    for _sweep in 0..MAX_SWEEPS {
        if offdiag_frobenius(&a) <= tol {
            return Ok((a.diag().to_owned(), v));
        }
        for p in 0..d - 1 {
            for q in (p + 1)..d {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                // Stable rotation choice (smaller angle root).
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;

                let app = a[[p, p]];
                let aqq = a[[q, q]];
                a[[p, p]] = app - t * apq;
                a[[q, q]] = aqq + t * apq;
                a[[p, q]] = 0.0;
                a[[q, p]] = 0.0;
                for i in 0..d {
                    if i == p || i == q {
                        continue;
                    }
                    let aip = a[[i, p]];
                    let aiq = a[[i, q]];
                    a[[i, p]] = c * aip - sn * aiq;
                    a[[p, i]] = a[[i, p]];
                    a[[i, q]] = sn * aip + c * aiq;
                    a[[q, i]] = a[[i, q]];
                }
                for i in 0..d {
                    let vip = v[[i, p]];
                    let viq = v[[i, q]];
                    v[[i, p]] = c * vip - sn * viq;
                    v[[i, q]] = sn * vip + c * viq;
                }
            }
        }
    }
    if offdiag_frobenius(&a) <= tol {
        return Ok((a.diag().to_owned(), v));
    }
    Err(Error::NoConvergence(format!(
        "Jacobi sweeps exhausted: off-diagonal {:.3e} above {:.3e}",
        offdiag_frobenius(&a),
        tol
    )))
}

/// Index permutation sorting eigenvalues by |λ| descending, breaking
/// magnitude ties by signed value descending (so +σ precedes −σ), then by
/// original index.
fn magnitude_order(vals: &Array1<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&i, &j| {
        vals[j]
            .abs()
            .partial_cmp(&vals[i].abs())
            .unwrap()
            .then(vals[j].partial_cmp(&vals[i]).unwrap())
            .then(i.cmp(&j))
    });
    idx
}

fn permute_eig(vals: Array1<f64>, vecs: Array2<f64>, order: &[usize]) -> (Array1<f64>, Array2<f64>) {
    let d = vecs.nrows();
    let out_vals = Array1::from_iter(order.iter().map(|&i| vals[i]));
    let mut out_vecs = Array2::zeros((d, order.len()));
    for (newc, &oldc) in order.iter().enumerate() {
        out_vecs.column_mut(newc).assign(&vecs.column(oldc));
    }
    (out_vals, out_vecs)
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues sorted by magnitude descending (ties: signed value
/// descending, then original position) and the matching orthonormal
/// eigenvectors as columns. The input may carry relative asymmetry up to
/// 1e-8; it is symmetrized before factorization. Capped at d ≤ 2000.
pub fn dense_symmetric_eig(m: ArrayView2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    check_cap(m.nrows())?;
    let sym = symmetrized(m, "eigensolver input")?;
    let (vals, vecs) = jacobi_eig(sym)?;
    let order = magnitude_order(&vals);
    Ok(permute_eig(vals, vecs, &order))
}

/// Inverse square root of a dense SPD matrix via its eigendecomposition.
/// Eigenvalues at or below `rel_floor` times the largest are rejected.
pub fn inv_sqrt_spd(m: ArrayView2<f64>, rel_floor: f64) -> Result<Array2<f64>> {
    let (vals, vecs) = dense_symmetric_eig(m)?;
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= rel_floor * max {
        return Err(Error::NotSpd(format!(
            "eigenvalues in [{min:.3e}, {max:.3e}] fail the relative floor {rel_floor:.1e}"
        )));
    }
    let d = vecs.nrows();
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.columns_mut().into_iter().enumerate() {
        col *= 1.0 / vals[j].sqrt();
    }
    let mut out = scaled.dot(&vecs.t());
    // Re-symmetrize: the product is symmetric in exact arithmetic.
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (out[[i, j]] + out[[j, i]]);
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    Ok(out)
}

/// Generalized eigendecomposition of a symmetric pair (A, B) with B SPD.
///
/// Returns eigenvalues by magnitude descending and eigenvectors V with
/// VᵀBV = I. Internally whitens: eigendecomposes B^{-1/2}·A·B^{-1/2} and
/// maps each eigenvector u to B^{-1/2}u, then verifies every residual
/// ‖A v − λ B v‖ against a relative 1e-8 bound before returning.
pub fn dense_generalized_eig(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let d = a.nrows();
    if b.nrows() != d || b.ncols() != d || a.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: b.nrows().max(a.ncols()) });
    }
    check_cap(d)?;
    let a_sym = symmetrized(a, "left matrix")?;
    let b_sym = symmetrized(b, "metric")?;
    let b_inv_sqrt = inv_sqrt_spd(b_sym.view(), SPD_REL_FLOOR)?;
    let whitened = b_inv_sqrt.dot(&a_sym).dot(&b_inv_sqrt);
    let (vals, u) = dense_symmetric_eig(whitened.view())?;
    let v = b_inv_sqrt.dot(&u);

    let a_scale = frobenius(a_sym.view());
    let b_scale = frobenius(b_sym.view());
    for j in 0..d {
        let vj = v.column(j);
        let av = a_sym.dot(&vj);
        let bv = b_sym.dot(&vj);
        let mut res = 0.0f64;
        for i in 0..d {
            let e = av[i] - vals[j] * bv[i];
            res += e * e;
        }
        let vnorm = vj.dot(&vj).sqrt();
        let scale = (a_scale + vals[j].abs() * b_scale) * vnorm;
        if res.sqrt() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::NoConvergence(format!(
                "generalized eigenpair {j} residual {:.3e} exceeds 1e-8 of scale {:.3e}",
                res.sqrt(),
                scale
            )));
        }
    }
    Ok((vals, v))
}

/// Singular values of a dense matrix, descending, via the Gram matrix of
/// the smaller side. Negative roundoff eigenvalues clamp to zero.
pub fn singular_values(c: ArrayView2<f64>) -> Result<Array1<f64>> {
    let (p, q) = c.dim();
    let gram = if p <= q {
        c.dot(&c.t())
    } else {
        c.t().dot(&c)
    };
    let (vals, _) = dense_symmetric_eig(gram.view())?;
    let mut sv: Vec<f64> = vals.iter().map(|&x| x.max(0.0).sqrt()).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(Array1::from(sv))
}

/// Extends `existing` (columns assumed orthonormal) with `need` more
/// orthonormal columns drawn from the canonical basis.
fn complete_orthonormal(existing: &Array2<f64>, need: usize) -> Array2<f64> {
    let d = existing.nrows();
    let mut cols: Vec<Array1<f64>> = Vec::with_capacity(need);
    'candidates: for j in 0..d {
        if cols.len() == need {
            break;
        }
        let mut v = Array1::zeros(d);
        v[j] = 1.0;
        // Two projection passes keep the completion orthogonal to 1e-14.
        for _ in 0..2 {
            for c in existing.columns() {
                let coef = c.dot(&v);
                v.scaled_add(-coef, &c);
            }
            for c in &cols {
                let coef = c.dot(&v);
                v.scaled_add(-coef, c);
            }
        }
        let n = v.dot(&v).sqrt();
        if n < 1e-3 {
            continue 'candidates;
        }
        cols.push(v / n);
    }
    let mut out = Array2::zeros((d, cols.len()));
    for (j, c) in cols.iter().enumerate() {
        out.column_mut(j).assign(c);
    }
    out
}

/// Thin SVD of a small dense matrix: C = U·diag(S)·Vt with U p×r, S r,
/// Vt r×q for r = min(p, q), singular values descending.
///
/// Computed from the symmetric block embedding [[0, C], [Cᵀ, 0]], whose
/// eigenpairs (±σ, (u; ±v)/√2) give the factors directly; directions for
/// exactly zero singular values are filled by an arbitrary orthonormal
/// completion (they contribute nothing to the reconstruction).
pub fn svd_small(c: ArrayView2<f64>) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let (p, q) = c.dim();
    let n = p + q;
    check_cap(n)?;
    let r = p.min(q);
    let mut h = Array2::zeros((n, n));
    h.slice_mut(s![..p, p..]).assign(&c);
    h.slice_mut(s![p.., ..p]).assign(&c.t());
    let (vals, vecs) = dense_symmetric_eig(h.view())?;

    let sigma_floor = vals.iter().fold(0.0f64, |m, &x| m.max(x.abs())) * 1e-13;
    let mut u = Array2::zeros((p, r));
    let mut vt = Array2::zeros((r, q));
    let mut sv = Array1::zeros(r);
    let mut taken = 0usize;
    let sqrt2 = std::f64::consts::SQRT_2;
    for i in 0..n {
        if taken == r {
            break;
        }
        if vals[i] <= sigma_floor {
            continue;
        }
        let z = vecs.column(i);
        for row in 0..p {
            u[[row, taken]] = sqrt2 * z[row];
        }
        for col in 0..q {
            vt[[taken, col]] = sqrt2 * z[p + col];
        }
        sv[taken] = vals[i];
        taken += 1;
    }
    if taken < r {
        let u_fill = complete_orthonormal(&u.slice(s![.., ..taken]).to_owned(), r - taken);
        let v_fill = complete_orthonormal(&vt.slice(s![..taken, ..]).t().to_owned(), r - taken);
        for j in 0..(r - taken) {
            u.column_mut(taken + j).assign(&u_fill.column(j));
            for col in 0..q {
                vt[[taken + j, col]] = v_fill[[col, j]];
            }
        }
    }
    Ok((u, sv, vt))
}

/// Lower-triangular Cholesky factor of a small SPD matrix (LLᵀ = M).
pub fn cholesky_factor(m: ArrayView2<f64>) -> Result<Array2<f64>> {
    let d = m.nrows();
    if m.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: m.ncols() });
    }
    let max_diag = (0..d).map(|i| m[[i, i]].abs()).fold(0.0f64, f64::max);
    let mut l = Array2::zeros((d, d));
    for j in 0..d {
        let mut diag = m[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if diag <= 1e-14 * max_diag.max(f64::MIN_POSITIVE) {
            return Err(Error::NotSpd(format!(
                "Cholesky pivot {diag:.3e} at column {j} is not positive"
            )));
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in (j + 1)..d {
            let mut v = 0.5 * (m[[i, j]] + m[[j, i]]);
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / ljj;
        }
    }
    Ok(l)
}

/// Solves L·Lᵀ·x = rhs given the lower Cholesky factor.
pub fn cholesky_solve(l: &Array2<f64>, rhs: ArrayView1<f64>) -> Array1<f64> {
    let d = l.nrows();
    let mut y = rhs.to_owned();
    for i in 0..d {
        for k in 0..i {
            let lik = l[[i, k]];
            y[i] -= lik * y[k];
        }
        y[i] /= l[[i, i]];
    }
    for i in (0..d).rev() {
        for k in (i + 1)..d {
            let lki = l[[k, i]];
            y[i] -= lki * y[k];
        }
        y[i] /= l[[i, i]];
    }
    y
}

/// Solves the SPD system M·x = rhs by Cholesky factorization.
pub fn solve_spd_dense(m: ArrayView2<f64>, rhs: ArrayView1<f64>) -> Result<Array1<f64>> {
    if rhs.len() != m.nrows() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: rhs.len() });
    }
    let l = cholesky_factor(m)?;
    Ok(cholesky_solve(&l, rhs))
}

/// Largest principal angle between two k-column subspaces under the B
/// inner product.
#[derive(Debug, Clone, Copy)]
pub struct Angles {
    pub theta: f64,
    pub sin_theta: f64,
    pub cos_theta: f64,
    /// +∞ sentinel once cos θ < 1e-12.
    pub tan_theta: f64,
}

/// Largest principal angle between span(W) and span(V) in the B metric.
///
/// Both inputs are B-orthonormalized internally, then
/// cos θ = σ_min(QᵥᵀB Q_w); sin and tan follow from cos, with tan reported
/// as +∞ once cos θ < 1e-12. Note the complement identity
/// sin θ = ‖Q⊥ᵀB Qᵥ‖ is algebraically equal but this route loses accuracy
/// below sin θ ≈ 1e-8 (σ_min is then 1 up to f64 roundoff).
pub fn principal_angle(
    w: ArrayView2<f64>,
    v: ArrayView2<f64>,
    b: &SpdOperator,
) -> Result<Angles> {
    if w.ncols() != v.ncols() {
        return Err(Error::DimensionMismatch { expected: w.ncols(), found: v.ncols() });
    }
    let qw = gs_b(b, w)?;
    let qv = gs_b(b, v)?;
    // bq columns are B·(columns of q), cached by the factorization.
    let gram = qv.q.basis().t().dot(&qw.bq);
    let sv = singular_values(gram.view())?;
    let cos = sv[sv.len() - 1].clamp(0.0, 1.0);
    let sin = (1.0 - cos * cos).max(0.0).sqrt();
    let tan = if cos < 1e-12 { f64::INFINITY } else { sin / cos };
    Ok(Angles { theta: cos.acos(), sin_theta: sin, cos_theta: cos, tan_theta: tan })
}

/// sin of the largest principal angle via the complement route
/// ‖W⊥ᵀB Qᵥ‖₂, where W⊥ is a B-orthonormal basis of span(W)'s complement.
/// Cross-checks `principal_angle`; needs d−k extra basis columns so it is
/// strictly a small-instance tool.
pub fn sin_via_complement(
    w: ArrayView2<f64>,
    v: ArrayView2<f64>,
    b: &SpdOperator,
) -> Result<f64> {
    let d = w.nrows();
    let k = w.ncols();
    if v.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, found: v.nrows() });
    }
    check_cap(d)?;
    if k >= d {
        return Ok(0.0);
    }
    let qw = gs_b(b, w)?;
    let qv = gs_b(b, v)?;
    // Extend span(W) to the full space with deterministic pseudo-random
    // columns; the Gaussian fill makes degenerate pivots a measure-zero
    // event.
    let fill = crate::linops::random_gaussian_matrix(d, d - k, 0x0c0_ffee);
    let mut stacked = Array2::zeros((d, d));
    stacked.slice_mut(s![.., ..k]).assign(qw.q.basis());
    stacked.slice_mut(s![.., k..]).assign(&fill);
    let qfull = gs_b(b, stacked.view())?;
    let complement = qfull.q.basis().slice(s![.., k..]).to_owned();
    let cross = complement.t().dot(&qv.bq);
    let sv = singular_values(cross.view())?;
    Ok(sv[0].clamp(0.0, 1.0))
}

/// Dense reference CCA: the top-k singular triples of
/// T = (S_xx+λ_xI)^{-1/2} · S_xy · (S_yy+λ_yI)^{-1/2}, mapped back through
/// the inverse square roots so the returned bases are metric-orthonormal.
pub fn dense_cca(ds: &CcaDataset, k: usize) -> Result<CcaResult> {
    let dx = ds.dx();
    let dy = ds.dy();
    check_cap(dx + dy)?;
    if k == 0 || k > dx.min(dy) {
        return Err(Error::InvalidConfig(format!(
            "k = {k} must lie in 1..=min(dx, dy) = {}",
            dx.min(dy)
        )));
    }
    let sxx = ds.metric_xx_dense();
    let syy = ds.metric_yy_dense();
    let sxy = ds.cross_covariance_dense();
    let rx = inv_sqrt_spd(sxx.view(), SPD_REL_FLOOR)?;
    let ry = inv_sqrt_spd(syy.view(), SPD_REL_FLOOR)?;
    let t = rx.dot(&sxy).dot(&ry);
    let (u, sv, vt) = svd_small(t.view())?;
    let wx = rx.dot(&u.slice(s![.., ..k]));
    let wy = ry.dot(&vt.slice(s![..k, ..]).t());
    let correlations = Array1::from_iter(sv.iter().take(k).map(|&x| x.clamp(0.0, 1.0)));
    Ok(CcaResult { wx, wy, correlations })
}

/// Wraps a dense symmetric matrix as an SPD metric operator for tests and
/// small-instance angle measurements.
pub fn dense_metric(b: ArrayView2<f64>) -> Result<SpdOperator> {
    Ok(SpdOperator::new(Arc::new(DenseSymmetricOperator::new(b.to_owned())?)))
}
