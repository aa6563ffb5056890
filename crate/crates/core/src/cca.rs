//! Canonical correlation analysis by reduction to a top-2k generalized
//! eigenproblem on the block pair
//!
//! ```text
//! A = | 0     S_xy |     B = | S_xx + λx·I   0           |
//!     | S_yx  0    |          | 0             S_yy + λy·I |
//! ```
//!
//! with S_xx = XᵀX/n, S_yy = YᵀY/n, S_xy = XᵀY/n. The covariance matrices
//! are never materialized: every operator application streams through the
//! data matrices (S_xy·v is computed as Xᵀ(Y·v)/n), so one application
//! costs nnz(X) + nnz(Y) regardless of d₁·d₂.

use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linops::{gs_b, random_gaussian_matrix, ApplyCounter, LinearOperator, SpdOperator};
use crate::oracle;
use crate::power::{genelink, ConvergenceTrace, GenEigConfig, GenEigProblem};
use crate::solvers::SolverConfig;

/// Relative eigenvalue floor below which a projected direction counts as
/// collapsed during pseudo-whitening.
const WHITEN_REL_FLOOR: f64 = 1e-12;
/// σ_min threshold on U₁+U₂ below which a random projection is redrawn.
const PROJECTION_SIGMA_FLOOR: f64 = 1e-10;
/// Fresh redraws allowed after the first degenerate projection.
const PROJECTION_RETRIES: usize = 3;

/// One view's data matrix: n samples by d features, dense or sparse.
///
/// The `apply`/`apply_transpose` kernels are raw (they panic on shape
/// misuse); [`CcaDataset`] validates shapes once at construction.
#[derive(Debug, Clone)]
pub enum DataMatrix {
    Dense(Array2<f64>),
    Sparse(crate::linops::CsrMatrix),
}

impl DataMatrix {
    pub fn nrows(&self) -> usize {
        match self {
            DataMatrix::Dense(m) => m.nrows(),
            DataMatrix::Sparse(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            DataMatrix::Dense(m) => m.ncols(),
            DataMatrix::Sparse(m) => m.ncols(),
        }
    }

    /// Per-pass cost weight: stored entries (all of them for dense data).
    pub fn nnz(&self) -> usize {
        match self {
            DataMatrix::Dense(m) => m.len(),
            DataMatrix::Sparse(m) => m.nnz(),
        }
    }

    /// X·v (feature space → sample space).
    pub fn apply(&self, v: ArrayView1<f64>) -> Array1<f64> {
        match self {
            DataMatrix::Dense(m) => m.dot(&v),
            DataMatrix::Sparse(m) => m.apply(v),
        }
    }

    /// Xᵀ·u (sample space → feature space).
    pub fn apply_transpose(&self, u: ArrayView1<f64>) -> Array1<f64> {
        match self {
            DataMatrix::Dense(m) => m.t().dot(&u),
            DataMatrix::Sparse(m) => m.apply_transpose(u),
        }
    }

    /// X·W column-wise: projects k directions onto the samples.
    pub fn project(&self, w: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.nrows(), w.ncols()));
        for (j, col) in w.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.apply(col));
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            DataMatrix::Dense(m) => m.clone(),
            DataMatrix::Sparse(m) => m.to_dense(),
        }
    }

    fn frobenius_sq(&self) -> f64 {
        match self {
            DataMatrix::Dense(m) => m.iter().map(|v| v * v).sum(),
            DataMatrix::Sparse(m) => m.values().iter().map(|v| v * v).sum(),
        }
    }
}

/// A paired dataset (X: n×d₁, Y: n×d₂) with ridge terms added to both
/// empirical covariances.
#[derive(Debug, Clone)]
pub struct CcaDataset {
    x: DataMatrix,
    y: DataMatrix,
    n: usize,
    reg_x: f64,
    reg_y: f64,
}

impl CcaDataset {
    /// `None` regularization defaults to 1e-6·tr(S)/d for that view — a
    /// trace-scaled ridge that is invariant to the data's overall scale.
    pub fn new(
        x: DataMatrix,
        y: DataMatrix,
        reg_x: Option<f64>,
        reg_y: Option<f64>,
    ) -> Result<Self> {
        let n = x.nrows();
        if n == 0 {
            return Err(Error::InvalidConfig("dataset has no samples".into()));
        }
        if y.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, found: y.nrows() });
        }
        if x.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::InvalidConfig("dataset has a zero-width view".into()));
        }
        let default_reg = |m: &DataMatrix| {
            // tr(S) = ‖M‖_F²/n.
            1e-6 * m.frobenius_sq() / (n as f64 * m.ncols() as f64)
        };
        let reg_x = reg_x.unwrap_or_else(|| default_reg(&x));
        let reg_y = reg_y.unwrap_or_else(|| default_reg(&y));
        if !(reg_x >= 0.0 && reg_y >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "regularization must be nonnegative, got ({reg_x}, {reg_y})"
            )));
        }
        Ok(CcaDataset { x, y, n, reg_x, reg_y })
    }

    pub fn x(&self) -> &DataMatrix {
        &self.x
    }

    pub fn y(&self) -> &DataMatrix {
        &self.y
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> usize {
        self.x.ncols()
    }

    pub fn dy(&self) -> usize {
        self.y.ncols()
    }

    pub fn reg_x(&self) -> f64 {
        self.reg_x
    }

    pub fn reg_y(&self) -> f64 {
        self.reg_y
    }

    /// S_xx + λx·I, materialized (oracle/test use only).
    pub fn metric_xx_dense(&self) -> Array2<f64> {
        let xd = self.x.to_dense();
        let mut s = xd.t().dot(&xd) / self.n as f64;
        for i in 0..s.nrows() {
            s[[i, i]] += self.reg_x;
        }
        s
    }

    /// S_yy + λy·I, materialized (oracle/test use only).
    pub fn metric_yy_dense(&self) -> Array2<f64> {
        let yd = self.y.to_dense();
        let mut s = yd.t().dot(&yd) / self.n as f64;
        for i in 0..s.nrows() {
            s[[i, i]] += self.reg_y;
        }
        s
    }

    /// S_xy (no regularization), materialized (oracle/test use only).
    pub fn cross_covariance_dense(&self) -> Array2<f64> {
        let xd = self.x.to_dense();
        let yd = self.y.to_dense();
        xd.t().dot(&yd) / self.n as f64
    }
}

/// The recovered canonical directions and correlations.
///
/// Invariants: wxᵀ(S_xx+λI)wx = I and wyᵀ(S_yy+λI)wy = I to 1e-8;
/// correlations are the diagonal of wxᵀS_xy wy, nonnegative descending.
#[derive(Debug, Clone)]
pub struct CcaResult {
    pub wx: Array2<f64>,
    pub wy: Array2<f64>,
    pub correlations: Array1<f64>,
}

/// Per-iteration history of a ccalin run plus projection diagnostics.
#[derive(Debug, Clone)]
pub struct CcaTrace {
    /// The block-pair eigeniteration trace (2k-dimensional iterates).
    pub outer: ConvergenceTrace,
    /// Gaussian projections drawn until one passed the σ_min check.
    pub projection_attempts: usize,
}

/// The off-diagonal block operator A: (u; v) ↦ (S_xy·v; S_yx·u), streamed
/// through the data.
struct CrossCovarianceBlock {
    ds: Arc<CcaDataset>,
    counter: ApplyCounter,
}

impl LinearOperator for CrossCovarianceBlock {
    fn dim(&self) -> usize {
        self.ds.dx() + self.ds.dy()
    }

    fn nnz(&self) -> usize {
        self.ds.x.nnz() + self.ds.y.nnz()
    }

    fn apply_count(&self) -> u64 {
        self.counter.get()
    }

    fn apply(&self, w: ArrayView1<f64>) -> Result<Array1<f64>> {
        let dx = self.ds.dx();
        let dy = self.ds.dy();
        crate::linops::check_dim(dx + dy, w.len())?;
        self.counter.bump();
        let inv_n = 1.0 / self.ds.n as f64;
        let u = w.slice(s![..dx]);
        let v = w.slice(s![dx..]);
        let top = self.ds.x.apply_transpose(self.ds.y.apply(v).view()) * inv_n;
        let bot = self.ds.y.apply_transpose(self.ds.x.apply(u).view()) * inv_n;
        let mut out = Array1::zeros(dx + dy);
        out.slice_mut(s![..dx]).assign(&top);
        out.slice_mut(s![dx..]).assign(&bot);
        Ok(out)
    }
}

/// The block-diagonal metric B: (u; v) ↦ ((S_xx+λx)u; (S_yy+λy)v).
struct BlockDiagonalMetric {
    ds: Arc<CcaDataset>,
    counter: ApplyCounter,
}

impl LinearOperator for BlockDiagonalMetric {
    fn dim(&self) -> usize {
        self.ds.dx() + self.ds.dy()
    }

    fn nnz(&self) -> usize {
        // Two data passes plus the ridge diagonal.
        self.ds.x.nnz() + self.ds.y.nnz() + self.dim()
    }

    fn apply_count(&self) -> u64 {
        self.counter.get()
    }

    fn apply(&self, w: ArrayView1<f64>) -> Result<Array1<f64>> {
        let dx = self.ds.dx();
        let dy = self.ds.dy();
        crate::linops::check_dim(dx + dy, w.len())?;
        self.counter.bump();
        let inv_n = 1.0 / self.ds.n as f64;
        let u = w.slice(s![..dx]);
        let v = w.slice(s![dx..]);
        let mut top = self.ds.x.apply_transpose(self.ds.x.apply(u).view()) * inv_n;
        top.scaled_add(self.ds.reg_x, &u);
        let mut bot = self.ds.y.apply_transpose(self.ds.y.apply(v).view()) * inv_n;
        bot.scaled_add(self.ds.reg_y, &v);
        let mut out = Array1::zeros(dx + dy);
        out.slice_mut(s![..dx]).assign(&top);
        out.slice_mut(s![dx..]).assign(&bot);
        Ok(out)
    }
}

/// One view's regularized covariance as a standalone metric (for the
/// per-view Gram–Schmidt passes after projection).
struct SideMetric {
    ds: Arc<CcaDataset>,
    x_side: bool,
    counter: ApplyCounter,
}

impl LinearOperator for SideMetric {
    fn dim(&self) -> usize {
        if self.x_side {
            self.ds.dx()
        } else {
            self.ds.dy()
        }
    }

    fn nnz(&self) -> usize {
        let data = if self.x_side { self.ds.x.nnz() } else { self.ds.y.nnz() };
        data + self.dim()
    }

    fn apply_count(&self) -> u64 {
        self.counter.get()
    }

    fn apply(&self, w: ArrayView1<f64>) -> Result<Array1<f64>> {
        crate::linops::check_dim(self.dim(), w.len())?;
        self.counter.bump();
        let inv_n = 1.0 / self.ds.n as f64;
        let (m, reg) = if self.x_side {
            (&self.ds.x, self.ds.reg_x)
        } else {
            (&self.ds.y, self.ds.reg_y)
        };
        let mut out = m.apply_transpose(m.apply(w).view()) * inv_n;
        out.scaled_add(reg, &w);
        Ok(out)
    }
}

/// Builds the implicit block pair (A, B) over dimension d₁+d₂.
pub fn build_cca_operators(ds: &Arc<CcaDataset>) -> (Arc<dyn LinearOperator>, SpdOperator) {
    let a: Arc<dyn LinearOperator> = Arc::new(CrossCovarianceBlock {
        ds: Arc::clone(ds),
        counter: ApplyCounter::default(),
    });
    let b = SpdOperator::new(Arc::new(BlockDiagonalMetric {
        ds: Arc::clone(ds),
        counter: ApplyCounter::default(),
    }));
    (a, b)
}

/// S_xy·W streamed through the data, one column at a time.
fn cross_apply_matrix(ds: &CcaDataset, w: ArrayView2<f64>) -> Array2<f64> {
    let inv_n = 1.0 / ds.n as f64;
    let mut out = Array2::zeros((ds.dx(), w.ncols()));
    for (j, col) in w.columns().into_iter().enumerate() {
        let tmp = ds.y.apply(col);
        out.column_mut(j)
            .assign(&(ds.x.apply_transpose(tmp.view()) * inv_n));
    }
    out
}

/// Collapses a (d₁+d₂)×2k block-space basis to per-view k-column results:
/// random 2k→k Gaussian projection (redrawn up to 3 times when σ_min of
/// U₁+U₂ falls below 1e-10), independent per-view Gram–Schmidt in the
/// regularized covariance metrics, and an SVD realignment of wxᵀS_xy wy so
/// the reported correlations are its nonnegative descending diagonal.
///
/// Exposed separately from [`ccalin`] so mid-run block iterates (from a
/// trace with `keep_iterates`) can be evaluated with the same pipeline.
/// Returns the projection attempts used alongside the result.
pub fn project_block_iterate(
    ds: &Arc<CcaDataset>,
    block_basis: ArrayView2<f64>,
    k: usize,
    rng_seed: u64,
) -> Result<(CcaResult, usize)> {
    let dx = ds.dx();
    let dy = ds.dy();
    let (rows, m) = block_basis.dim();
    if rows != dx + dy {
        return Err(Error::DimensionMismatch { expected: dx + dy, found: rows });
    }
    if k == 0 || m != 2 * k {
        return Err(Error::InvalidConfig(format!(
            "projection expects a 2k-column block basis, got k = {k}, columns = {m}"
        )));
    }

    // Redraw U until the two k×k halves are jointly nondegenerate: in the
    // ideal (φ; ψ)/(−φ; ψ) basis the x-side span is governed by U₁+U₂.
    let mut attempts = 0;
    let u = loop {
        attempts += 1;
        if attempts > 1 + PROJECTION_RETRIES {
            return Err(Error::ProjectionDegenerate { attempts: attempts - 1 });
        }
        let u = random_gaussian_matrix(2 * k, k, rng_seed.wrapping_add(attempts as u64 - 1));
        let combined = &u.slice(s![..k, ..]) + &u.slice(s![k.., ..]);
        let sv = oracle::singular_values(combined.view())?;
        if sv[sv.len() - 1] > PROJECTION_SIGMA_FLOOR {
            break u;
        }
    };

    let wx_tilde = block_basis.slice(s![..dx, ..]).dot(&u);
    let wy_tilde = block_basis.slice(s![dx.., ..]).dot(&u);

    let bx = SpdOperator::new(Arc::new(SideMetric {
        ds: Arc::clone(ds),
        x_side: true,
        counter: ApplyCounter::default(),
    }));
    let by = SpdOperator::new(Arc::new(SideMetric {
        ds: Arc::clone(ds),
        x_side: false,
        counter: ApplyCounter::default(),
    }));
    let (gx, gy) = rayon::join(
        || gs_b(&bx, wx_tilde.view()),
        || gs_b(&by, wy_tilde.view()),
    );
    let wx = gx?.q;
    let wy = gy?.q;

    // Realign inside the two spans: wxᵀ S_xy wy = U_c Σ V_cᵀ, so rotating
    // by U_c/V_c makes the cross-correlation matrix exactly diag(Σ).
    let c = wx.basis().t().dot(&cross_apply_matrix(ds, wy.basis().view()));
    let (uc, sigma, vtc) = oracle::svd_small(c.view())?;
    let wx = wx.basis().dot(&uc);
    let wy = wy.basis().dot(&vtc.t());

    Ok((
        CcaResult { wx, wy, correlations: sigma },
        attempts,
    ))
}

/// CCA via the block-pair eigeniteration: runs the top-2k generalized
/// eigensolver on (A, B) from [`build_cca_operators`], then collapses the
/// 2k-space to per-view directions with [`project_block_iterate`].
///
/// `cfg` drives the block iteration (its ρ/γ hints, if any, refer to the
/// block pair's spectrum — the ±correlation ladder). An optional
/// `reference` (a (d₁+d₂)×2k basis spanning the true top block subspace,
/// not necessarily orthonormalized) enables sin θ tracing and early stop
/// inside the eigensolver.
pub fn ccalin(
    ds: &Arc<CcaDataset>,
    k: usize,
    cfg: &GenEigConfig,
    solver_cfg: &SolverConfig,
    reference: Option<ArrayView2<f64>>,
) -> Result<(CcaResult, CcaTrace)> {
    let d_total = ds.dx() + ds.dy();
    if k == 0 || 2 * k > d_total {
        return Err(Error::InvalidConfig(format!(
            "k = {k} needs 2k ≤ d₁+d₂ = {d_total}"
        )));
    }
    let (a, b) = build_cca_operators(ds);
    let reference = match reference {
        Some(basis) => Some(gs_b(&b, basis)?.q),
        None => None,
    };
    let problem = GenEigProblem::new(a, b, 2 * k)?;
    let eig = genelink(&problem, cfg, solver_cfg, reference.as_ref())?;

    let proj_seed = cfg.rng_seed.wrapping_add(0x50726f6a); // disjoint from init draws
    let (result, projection_attempts) =
        project_block_iterate(ds, eig.subspace.basis().view(), k, proj_seed)?;
    Ok((
        result,
        CcaTrace { outer: eig.trace, projection_attempts },
    ))
}

/// Eigendecomposition-based M^{-1/2} that drops collapsed directions
/// instead of failing: eigenvalues ≤ 1e-12·λ_max contribute nothing.
/// Returns the factor and the retained rank.
fn pseudo_inv_sqrt(s: ArrayView2<f64>) -> Result<(Array2<f64>, usize)> {
    let (vals, vecs) = oracle::dense_symmetric_eig(s)?;
    let d = vals.len();
    let vmax = vals.iter().fold(0.0f64, |a, &v| a.max(v));
    let mut out = Array2::zeros((d, d));
    let mut rank = 0;
    for i in 0..d {
        if vals[i] > WHITEN_REL_FLOOR * vmax && vals[i] > 0.0 {
            rank += 1;
            let vi = vecs.column(i);
            let w = 1.0 / vals[i].sqrt();
            for r in 0..d {
                for c in 0..d {
                    out[[r, c]] += w * vi[r] * vi[c];
                }
            }
        }
    }
    Ok((out, rank))
}

/// Total correlations captured: the sum of the canonical correlations of
/// the projected data pair, computed densely with pseudo-whitening so
/// collapsed (rank-deficient) directions contribute 0.
pub fn tcc(xp: ArrayView2<f64>, yp: ArrayView2<f64>) -> Result<f64> {
    let n = xp.nrows();
    if n == 0 {
        return Err(Error::InvalidConfig("projected data has no samples".into()));
    }
    if yp.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: yp.nrows() });
    }
    if xp.ncols() == 0 || yp.ncols() == 0 {
        return Err(Error::InvalidConfig("projected data has no columns".into()));
    }
    let inv_n = 1.0 / n as f64;
    let sxx = xp.t().dot(&xp) * inv_n;
    let syy = yp.t().dot(&yp) * inv_n;
    let sxy = xp.t().dot(&yp) * inv_n;
    let (rx, rank_x) = pseudo_inv_sqrt(sxx.view())?;
    let (ry, rank_y) = pseudo_inv_sqrt(syy.view())?;
    if rank_x == 0 || rank_y == 0 {
        return Ok(0.0);
    }
    let t = rx.dot(&sxy).dot(&ry);
    let sv = oracle::singular_values(t.view())?;
    Ok(sv.iter().map(|&s| s.clamp(0.0, 1.0)).sum())
}

/// Proportion of correlations captured:
/// TCC(X·wx, Y·wy) / TCC(X·vx, Y·vy) against a reference solution.
pub fn pcc(result: &CcaResult, reference: &CcaResult, ds: &CcaDataset) -> Result<f64> {
    let check = |w: &Array2<f64>, d: usize, side: &str| -> Result<()> {
        if w.nrows() != d {
            return Err(Error::InvalidConfig(format!(
                "{side} directions have {} rows, dataset has {d} features",
                w.nrows()
            )));
        }
        Ok(())
    };
    check(&result.wx, ds.dx(), "x")?;
    check(&result.wy, ds.dy(), "y")?;
    check(&reference.wx, ds.dx(), "x reference")?;
    check(&reference.wy, ds.dy(), "y reference")?;

    let t_ref = tcc(
        ds.x.project(reference.wx.view()).view(),
        ds.y.project(reference.wy.view()).view(),
    )?;
    if t_ref <= f64::EPSILON * reference.wx.ncols() as f64 {
        return Err(Error::UndefinedMetric(format!(
            "reference captures no correlation (TCC = {t_ref:e})"
        )));
    }
    let t_res = tcc(
        ds.x.project(result.wx.view()).view(),
        ds.y.project(result.wy.view()).view(),
    )?;
    Ok(t_res / t_ref)
}
