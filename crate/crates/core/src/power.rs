//! Inexact power / orthogonal iteration for the symmetric pair (A, B):
//! the top-1 and top-k generalized eigenvector algorithms.
//!
//! Each outer step multiplies by B⁻¹A approximately: the application of
//! B⁻¹ is replaced by a warm-started first-order solve of
//! `min ½wᵀBw − wᵀ(A·w_t)` to a multiplicative tolerance δ. Two δ regimes
//! are supported: a theory schedule driven by the relative eigengap
//! ρ = 1 − |λ_{k+1}|/|λ_k| (with a certified outer-iteration bound), and a
//! practical fixed-δ mode that stops on stagnation of the iterated
//! subspace.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linops::{
    gs_b, random_gaussian_matrix, random_unit_b, LinearOperator, SpdOperator, Subspace,
};
use crate::oracle;
use crate::solvers::{solve_spd, QuadraticObjective, SolveReport, SolverConfig};

/// Default ζ in the initialization floor ζ/√(d·k·κ(B)): a random B-unit
/// start achieves cos θ₀ at least this floor with probability ≥ 1 − ζ.
const INIT_FLOOR_ZETA: f64 = 0.1;
/// Practical mode stops after this many consecutive iterations whose
/// consecutive-subspace angle stays below ε.
const STAGNATION_STREAK: usize = 3;
/// Seed offset for the symmetry probe so it never collides with iterate
/// initialization.
const SYMMETRY_PROBE_SEED: u64 = 0x5eed_a110;

/// A symmetric pair (A, B) with B positive definite and a target count k.
pub struct GenEigProblem {
    a: Arc<dyn LinearOperator>,
    b: SpdOperator,
    k: usize,
}

impl GenEigProblem {
    /// Validates dimensions, 1 ≤ k ≤ d, and probabilistic symmetry of A
    /// (uᵀAv = vᵀAu on a fixed random pair, to 1e-10 relative; two
    /// applications of A).
    pub fn new(a: Arc<dyn LinearOperator>, b: SpdOperator, k: usize) -> Result<Self> {
        let d = a.dim();
        if b.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: b.dim() });
        }
        if k == 0 || k > d {
            return Err(Error::InvalidConfig(format!(
                "k = {k} must lie in 1..=d = {d}"
            )));
        }
        let probe = random_gaussian_matrix(d, 2, SYMMETRY_PROBE_SEED);
        let u = probe.column(0);
        let v = probe.column(1);
        let au = a.apply(u)?;
        let av = a.apply(v)?;
        let uav = u.dot(&av);
        let vau = v.dot(&au);
        let scale = au.dot(&au).sqrt() * v.dot(&v).sqrt()
            + av.dot(&av).sqrt() * u.dot(&u).sqrt();
        if (uav - vau).abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidConfig(format!(
                "operator is not symmetric: uᵀAv = {uav:e} but vᵀAu = {vau:e}"
            )));
        }
        Ok(GenEigProblem { a, b, k })
    }

    pub fn a(&self) -> &dyn LinearOperator {
        self.a.as_ref()
    }

    pub fn b(&self) -> &SpdOperator {
        &self.b
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }
}

/// Configuration for the outer iteration.
///
/// Exactly one of `rho_hint` (theory mode: eigengap-driven tolerance
/// schedule and iteration bound) or `fixed_delta` (practical mode:
/// constant inner tolerance, stagnation stopping) must be set.
#[derive(Debug, Clone)]
pub struct GenEigConfig {
    /// Target sin θ against the true top-k subspace.
    pub epsilon: f64,
    /// Hard cap on outer iterations in both modes.
    pub max_outer_iterations: usize,
    /// Relative eigengap ρ = 1 − |λ_{k+1}|/|λ_k| ∈ (0, 1]; enables theory
    /// mode. ρ = 1 is the degenerate-tail case (λ_{k+1} = 0).
    pub rho_hint: Option<f64>,
    /// γ = |λ₁|/|λ_k| ≥ 1; required by the theory schedule for k ≥ 1
    /// solves through the top-k path.
    pub gamma_hint: Option<f64>,
    /// Lower bound substituted for the unknown cos θ₀ in the schedule and
    /// iteration bound; defaults to ζ/√(d·k·κ(B)) with ζ = 0.1.
    pub cos_theta0_floor: Option<f64>,
    /// Constant inner tolerance; enables practical mode.
    pub fixed_delta: Option<f64>,
    pub rng_seed: u64,
    /// Snapshot every iterate (and its pre-normalization factor) into the
    /// trace — for diagnostics and contraction tests.
    pub keep_iterates: bool,
}

impl GenEigConfig {
    /// Theory mode with the given target and eigengap.
    pub fn theory(epsilon: f64, rho: f64) -> Self {
        GenEigConfig {
            epsilon,
            max_outer_iterations: 1000,
            rho_hint: Some(rho),
            gamma_hint: None,
            cos_theta0_floor: None,
            fixed_delta: None,
            rng_seed: 0,
            keep_iterates: false,
        }
    }

    /// Practical mode: fixed inner tolerance 1e-3, stagnation stopping.
    pub fn practical(epsilon: f64) -> Self {
        GenEigConfig {
            epsilon,
            max_outer_iterations: 1000,
            rho_hint: None,
            gamma_hint: None,
            cos_theta0_floor: None,
            fixed_delta: Some(1e-3),
            rng_seed: 0,
            keep_iterates: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon {} must lie in (0, 1)",
                self.epsilon
            )));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::InvalidConfig(
                "max_outer_iterations must be at least 1".into(),
            ));
        }
        match (self.rho_hint, self.fixed_delta) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::InvalidConfig(
                    "exactly one of rho_hint (theory mode) or fixed_delta (practical mode) must be set"
                        .into(),
                ));
            }
            (Some(rho), None) => {
                if !(rho > 0.0 && rho <= 1.0) {
                    return Err(Error::InvalidHint(format!(
                        "rho_hint {rho} must lie in (0, 1]; an exactly zero gap has no unique target subspace"
                    )));
                }
            }
            (None, Some(delta)) => {
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "fixed_delta {delta} must lie in (0, 1)"
                    )));
                }
            }
        }
        if let Some(g) = self.gamma_hint {
            if !(g >= 1.0 && g.is_finite()) {
                return Err(Error::InvalidHint(format!(
                    "gamma_hint {g} must be finite and at least 1"
                )));
            }
        }
        if let Some(f) = self.cos_theta0_floor {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "cos_theta0_floor {f} must lie in (0, 1]"
                )));
            }
        }
        Ok(())
    }

    fn is_theory(&self) -> bool {
        self.rho_hint.is_some()
    }
}

/// Tolerance-schedule regime selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulePhase {
    Top1Initial,
    Top1Converged,
    TopkInitial,
    TopkConverged,
}

/// The theorem-derived inner tolerance δ for one regime:
/// ρ²cos²θ₀/16 | ρ²/16 | ρ²cos⁴θ₀/(64kγ²) | ρ²/(64kγ²).
pub fn tolerance_schedule(
    phase: SchedulePhase,
    rho: f64,
    gamma: f64,
    k: usize,
    cos_theta0: f64,
) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidHint(format!("rho {rho} must lie in (0, 1]")));
    }
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(Error::InvalidHint(format!("gamma {gamma} must be at least 1")));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    if !(cos_theta0 > 0.0 && cos_theta0 <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "cos_theta0 {cos_theta0} must lie in (0, 1]"
        )));
    }
    let c2 = cos_theta0 * cos_theta0;
    Ok(match phase {
        SchedulePhase::Top1Initial => rho * rho * c2 / 16.0,
        SchedulePhase::Top1Converged => rho * rho / 16.0,
        SchedulePhase::TopkInitial => rho * rho * c2 * c2 / (64.0 * k as f64 * gamma * gamma),
        SchedulePhase::TopkConverged => rho * rho / (64.0 * k as f64 * gamma * gamma),
    })
}

/// Outer iterations certified to reach sin θ ≤ ε from cos θ₀:
/// ⌈(2/ρ)·ln(1/(ε·cosθ₀))⌉, or 0 when ε·cosθ₀ ≥ 1.
pub fn iteration_bound(rho: f64, epsilon: f64, cos_theta0: f64) -> Result<usize> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidHint(format!("rho {rho} must lie in (0, 1]")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!("epsilon {epsilon} must be positive")));
    }
    if !(cos_theta0 > 0.0 && cos_theta0 <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "cos_theta0 {cos_theta0} must lie in (0, 1]"
        )));
    }
    let product = epsilon * cos_theta0;
    if product >= 1.0 {
        return Ok(0);
    }
    Ok(((2.0 / rho) * (1.0 / product).ln()).ceil() as usize)
}

/// Rayleigh quotient (wᵀAw)/(wᵀBw). Two operator applications.
pub fn rayleigh_beta(a: &dyn LinearOperator, b: &SpdOperator, w: ArrayView1<f64>) -> Result<f64> {
    if w.len() != a.dim() || w.len() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: w.len() });
    }
    let aw = a.apply(w)?;
    let bw = b.apply(w)?;
    let denom = w.dot(&bw);
    let scale = w.dot(&w).sqrt() * bw.dot(&bw).sqrt();
    if denom <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSpd(format!(
            "quadratic form wᵀBw = {denom:e} is not positive"
        )));
    }
    Ok(w.dot(&aw) / denom)
}

/// Γ = (WᵀBW)⁻¹(WᵀAW), computed by a Cholesky solve (never an explicit
/// inverse). 2k operator applications. Rejects WᵀBW with condition number
/// above 1e12 as degenerate.
pub fn gamma_matrix(
    a: &dyn LinearOperator,
    b: &SpdOperator,
    w: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    let (d, k) = w.dim();
    if d != a.dim() || d != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: d });
    }
    if k == 0 || k > d {
        return Err(Error::InvalidConfig(format!("k = {k} must lie in 1..=d = {d}")));
    }
    let bw = b.apply_matrix(w)?;
    let aw = a.apply_matrix(w)?;
    let g = w.t().dot(&bw);
    let (gvals, _) = oracle::dense_symmetric_eig(g.view())?;
    let gmax = gvals[0].abs();
    let gmin = gvals[gvals.len() - 1].abs();
    if gmin <= 1e-12 * gmax {
        return Err(Error::DegenerateBasis {
            column: 0,
            pivot: gmin,
            threshold: 1e-12 * gmax,
        });
    }
    solve_gamma(&g, &w.t().dot(&aw))
}

/// Solves G·Γ = M column-by-column for SPD G.
fn solve_gamma(g: &Array2<f64>, m: &Array2<f64>) -> Result<Array2<f64>> {
    let l = oracle::cholesky_factor(g.view())?;
    let k = m.ncols();
    let mut gamma = Array2::zeros((g.nrows(), k));
    for j in 0..k {
        let col = oracle::cholesky_solve(&l, m.column(j));
        gamma.column_mut(j).assign(&col);
    }
    Ok(gamma)
}

/// Why the outer loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// The certified iteration bound completed (theory mode).
    IterationBoundReached,
    /// sin θ against the supplied reference dropped to ε.
    ReferenceConverged,
    /// Consecutive-iterate angles stayed below ε for 3 iterations
    /// (practical mode).
    Stagnated,
    /// max_outer_iterations ran out first.
    OuterBudgetExhausted,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::IterationBoundReached => "iteration_bound_reached",
            StopReason::ReferenceConverged => "reference_converged",
            StopReason::Stagnated => "stagnated",
            StopReason::OuterBudgetExhausted => "outer_budget_exhausted",
        };
        f.write_str(s)
    }
}

/// One outer-iteration record. Entry t describes the iterate W_t: its
/// Rayleigh data, the inner solve that produced it (zeroed for the random
/// initial iterate), the measured angle against the reference when one
/// was supplied, and cumulative operator-work counters.
#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub outer_iteration: usize,
    /// β_t as a 1×1 matrix for top-1; the k×k Γ_t for top-k.
    pub rayleigh: Array2<f64>,
    pub inner_report: SolveReport,
    /// sin of the largest principal angle against the reference subspace.
    pub sin_theta: Option<f64>,
    /// Inner tolerance requested for the solve that produced this iterate.
    pub delta_used: Option<f64>,
    /// A-plus-B applications since the run started (includes
    /// initialization).
    pub cumulative_operator_applications: u64,
    /// Applications weighted by each operator's nnz.
    pub cumulative_flop_proxy: f64,
    /// The iterate itself, when `keep_iterates` is on.
    pub iterate: Option<Array2<f64>>,
    /// The pre-orthonormalization scale: the GS R factor (k×k), or the
    /// 1×1 B-norm of the unnormalized top-1 iterate. With `iterate`, this
    /// reconstructs the raw solver output W̃ = Q·R exactly.
    pub prenormalization: Option<Array2<f64>>,
}

/// Per-iteration history of one run.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceTrace {
    pub entries: Vec<TraceEntry>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }

    pub fn total_operator_applications(&self) -> u64 {
        self.last().map_or(0, |e| e.cumulative_operator_applications)
    }

    pub fn total_flop_proxy(&self) -> f64 {
        self.last().map_or(0.0, |e| e.cumulative_flop_proxy)
    }
}

/// Top-1 output: the B-unit eigenvector estimate and its Rayleigh value.
#[derive(Debug, Clone)]
pub struct Top1Result {
    pub w: Array1<f64>,
    /// Final Rayleigh quotient β_T.
    pub eigenvalue: f64,
    pub outer_iterations: usize,
    pub stop: StopReason,
    pub trace: ConvergenceTrace,
}

/// Top-k output: a B-orthonormal basis rotated so column j is the j-th
/// Ritz vector, with the matching Ritz values by magnitude descending.
#[derive(Debug, Clone)]
pub struct TopkResult {
    pub subspace: Subspace,
    pub eigenvalues: Array1<f64>,
    pub outer_iterations: usize,
    pub stop: StopReason,
    pub trace: ConvergenceTrace,
}

/// Snapshot of the two operators' counters, for cumulative work tracking
/// relative to the start of a run.
struct WorkMeter<'p> {
    a: &'p dyn LinearOperator,
    b: &'p SpdOperator,
    a0: u64,
    b0: u64,
}

impl<'p> WorkMeter<'p> {
    fn new(a: &'p dyn LinearOperator, b: &'p SpdOperator) -> Self {
        WorkMeter { a, b, a0: a.apply_count(), b0: b.apply_count() }
    }

    fn cumulative(&self) -> (u64, f64) {
        let da = self.a.apply_count() - self.a0;
        let db = self.b.apply_count() - self.b0;
        let flops = da as f64 * self.a.nnz() as f64 + db as f64 * self.b.nnz() as f64;
        (da + db, flops)
    }
}

/// The per-iteration δ plan: theory mode switches from the strict initial
/// value to the looser converged value after the proof's phase split;
/// practical mode is constant.
struct DeltaPlan {
    initial: f64,
    converged: f64,
    switch_at: usize,
}

impl DeltaPlan {
    fn at(&self, t: usize) -> f64 {
        if t < self.switch_at {
            self.initial
        } else {
            self.converged
        }
    }
}

/// Resolves the cos θ₀ floor: explicit config value, else ζ/√(d·k·κ(B)).
fn resolve_floor(
    cfg: &GenEigConfig,
    b: &SpdOperator,
    d: usize,
    k: usize,
    solver_cfg: &SolverConfig,
) -> Result<f64> {
    if let Some(f) = cfg.cos_theta0_floor {
        return Ok(f);
    }
    let (mx, mn, _) = b.resolve_bounds(solver_cfg.spectral_source, solver_cfg.estimation_iters)?;
    let kappa = (mx / mn).max(1.0);
    Ok((INIT_FLOOR_ZETA / (d as f64 * k as f64 * kappa).sqrt()).min(1.0))
}

fn build_plan(
    cfg: &GenEigConfig,
    floor: f64,
    k: usize,
    top1: bool,
) -> Result<(DeltaPlan, Option<usize>)> {
    if let Some(rho) = cfg.rho_hint {
        let gamma = cfg.gamma_hint.unwrap_or(1.0);
        if !top1 && cfg.gamma_hint.is_none() {
            return Err(Error::InvalidConfig(
                "theory mode for the top-k path needs gamma_hint (= |λ₁|/|λ_k|)".into(),
            ));
        }
        let (initial, converged) = if top1 {
            (
                tolerance_schedule(SchedulePhase::Top1Initial, rho, 1.0, 1, floor)?,
                tolerance_schedule(SchedulePhase::Top1Converged, rho, 1.0, 1, floor)?,
            )
        } else {
            (
                tolerance_schedule(SchedulePhase::TopkInitial, rho, gamma, k, floor)?,
                tolerance_schedule(SchedulePhase::TopkConverged, rho, gamma, k, floor)?,
            )
        };
        // The proof's phase split: the angle is guaranteed out of the
        // initial regime after (2/ρ)·ln(1/cos θ₀) contractions.
        let switch_at = ((2.0 / rho) * (1.0 / floor).ln()).ceil() as usize;
        let bound = iteration_bound(rho, cfg.epsilon, floor)?;
        Ok((DeltaPlan { initial, converged, switch_at }, Some(bound)))
    } else {
        let delta = cfg.fixed_delta.expect("validated: practical mode");
        Ok((DeltaPlan { initial: delta, converged: delta, switch_at: 0 }, None))
    }
}

fn check_reference(reference: Option<&Subspace>, b: &SpdOperator, k: usize) -> Result<()> {
    if let Some(r) = reference {
        if r.metric_id() != b.metric_id() {
            return Err(Error::InvalidConfig(
                "reference subspace was orthonormalized against a different metric".into(),
            ));
        }
        if r.k() != k {
            return Err(Error::DimensionMismatch { expected: k, found: r.k() });
        }
    }
    Ok(())
}

/// sin of the largest principal angle between the reference and the
/// current B-orthonormal iterate, from the cached B·W product — no
/// operator applications. Accuracy floors around 1e-8 (σ_min route).
fn sin_against(reference: &Subspace, bw: &Array2<f64>) -> Result<f64> {
    let gram = reference.basis().t().dot(bw);
    let sv = oracle::singular_values(gram.view())?;
    let cos = sv[sv.len() - 1].clamp(0.0, 1.0);
    Ok((1.0 - cos * cos).max(0.0).sqrt())
}

/// Merges the k column solve reports of one outer iteration: iterations
/// and certificate are maxima (the Frobenius-aggregate error ratio is
/// bounded by the worst column), applications are summed.
fn merge_reports(reports: &[SolveReport]) -> SolveReport {
    SolveReport {
        inner_iterations: reports.iter().map(|r| r.inner_iterations).max().unwrap_or(0),
        achieved_ratio_bound: reports
            .iter()
            .map(|r| r.achieved_ratio_bound)
            .fold(0.0, f64::max),
        operator_applications: reports.iter().map(|r| r.operator_applications).sum(),
    }
}

const ZERO_REPORT: SolveReport = SolveReport {
    inner_iterations: 0,
    achieved_ratio_bound: 0.0,
    operator_applications: 0,
};

/// Top-1 generalized eigenvector by inexact power iteration.
///
/// Each outer step computes β_t = w_tᵀAw_t (the cached B·w_t has unit
/// quadratic form), solves `min ½wᵀBw − wᵀ(A·w_t)` from the warm start
/// β_t·w_t to the scheduled δ, and B-normalizes. A supplied `reference`
/// (the true top eigenvector) enables sin θ tracing and early stop at
/// sin θ ≤ ε.
pub fn genelin(
    problem: &GenEigProblem,
    cfg: &GenEigConfig,
    solver_cfg: &SolverConfig,
    reference: Option<&Subspace>,
) -> Result<Top1Result> {
    if problem.k != 1 {
        return Err(Error::InvalidConfig(format!(
            "top-1 path requires k = 1, problem has k = {}",
            problem.k
        )));
    }
    cfg.validate()?;
    check_reference(reference, &problem.b, 1)?;
    let d = problem.dim();
    let meter = WorkMeter::new(problem.a.as_ref(), &problem.b);

    let floor = if cfg.is_theory() {
        resolve_floor(cfg, &problem.b, d, 1, solver_cfg)?
    } else {
        1.0
    };
    let (plan, bound) = build_plan(cfg, floor, 1, true)?;
    let t_max = bound.unwrap_or(usize::MAX).min(cfg.max_outer_iterations);

    let mut w = random_unit_b(&problem.b, cfg.rng_seed)?;
    let mut bw = problem.b.apply(w.view())?;
    let mut aw = problem.a.apply(w.view())?;

    let mut trace = ConvergenceTrace::default();
    let push_entry = |t: usize,
                      w: &Array1<f64>,
                      bw: &Array1<f64>,
                      aw: &Array1<f64>,
                      report: SolveReport,
                      delta: Option<f64>,
                      prenorm: Option<f64>,
                      trace: &mut ConvergenceTrace|
     -> Result<f64> {
        let beta = w.dot(aw) / w.dot(bw);
        let sin = match reference {
            Some(r) => {
                let bw_mat = bw.view().insert_axis(ndarray::Axis(1)).to_owned();
                Some(sin_against(r, &bw_mat)?)
            }
            None => None,
        };
        let (apps, flops) = meter.cumulative();
        trace.entries.push(TraceEntry {
            outer_iteration: t,
            rayleigh: Array2::from_elem((1, 1), beta),
            inner_report: report,
            sin_theta: sin,
            delta_used: delta,
            cumulative_operator_applications: apps,
            cumulative_flop_proxy: flops,
            iterate: cfg.keep_iterates.then(|| {
                w.view().insert_axis(ndarray::Axis(1)).to_owned()
            }),
            prenormalization: prenorm
                .filter(|_| cfg.keep_iterates)
                .map(|n| Array2::from_elem((1, 1), n)),
        });
        Ok(sin.unwrap_or(f64::INFINITY))
    };

    let mut sin_now = push_entry(0, &w, &bw, &aw, ZERO_REPORT, None, None, &mut trace)?;
    let mut stop = if t_max == 0 {
        StopReason::IterationBoundReached
    } else {
        StopReason::OuterBudgetExhausted
    };
    if reference.is_some() && sin_now <= cfg.epsilon {
        stop = StopReason::ReferenceConverged;
    } else {
        let mut streak = 0usize;
        for t in 0..t_max {
            let beta = w.dot(&aw) / w.dot(&bw);
            let delta = plan.at(t);
            let obj = QuadraticObjective::new(problem.b.clone(), aw.clone())?;
            let warm = &w * beta;
            let (w_tilde, report) = solve_spd(&obj, warm.view(), delta, solver_cfg)?;

            let bw_tilde = problem.b.apply(w_tilde.view())?;
            let norm_sq = w_tilde.dot(&bw_tilde);
            if !(norm_sq.is_finite()) || norm_sq <= 1e-300 {
                return Err(Error::NoConvergence(format!(
                    "iterate collapsed: B-quadratic form {norm_sq:e} at outer iteration {t}"
                )));
            }
            let nb = norm_sq.sqrt();
            let prev_w = std::mem::replace(&mut w, &w_tilde / nb);
            bw = &bw_tilde / nb;
            aw = problem.a.apply(w.view())?;

            sin_now = push_entry(t + 1, &w, &bw, &aw, report, Some(delta), Some(nb), &mut trace)?;

            if reference.is_some() && sin_now <= cfg.epsilon {
                stop = StopReason::ReferenceConverged;
                break;
            }
            if !cfg.is_theory() {
                // Consecutive-iterate angle from cached products:
                // cos = |w_prevᵀ B w_new| with both sides B-unit.
                let cos_step = prev_w.dot(&bw).abs().min(1.0);
                let sin_step = (1.0 - cos_step * cos_step).max(0.0).sqrt();
                if sin_step < cfg.epsilon {
                    streak += 1;
                    if streak >= STAGNATION_STREAK {
                        stop = StopReason::Stagnated;
                        break;
                    }
                } else {
                    streak = 0;
                }
            }
            if t + 1 == t_max && bound.map_or(false, |tb| tb <= t_max) {
                stop = StopReason::IterationBoundReached;
            }
        }
    }

    let eigenvalue = w.dot(&aw) / w.dot(&bw);
    Ok(Top1Result {
        w,
        eigenvalue,
        outer_iterations: trace.len() - 1,
        stop,
        trace,
    })
}

/// Top-k generalized eigenvectors by inexact orthogonal iteration.
///
/// Each outer step forms Γ_t = (W_tᵀBW_t)⁻¹(W_tᵀAW_t) from cached
/// products, runs k independent warm-started column solves (right-hand
/// sides A·W_t, warm starts W_tΓ_t, each to the full scheduled δ — the
/// Frobenius aggregate contracts at least as well as the worst column),
/// and re-orthonormalizes with Gram–Schmidt in the B metric. The returned
/// basis is rotated to Ritz vectors with matching Ritz values.
pub fn genelink(
    problem: &GenEigProblem,
    cfg: &GenEigConfig,
    solver_cfg: &SolverConfig,
    reference: Option<&Subspace>,
) -> Result<TopkResult> {
    cfg.validate()?;
    let k = problem.k;
    let d = problem.dim();
    check_reference(reference, &problem.b, k)?;
    let meter = WorkMeter::new(problem.a.as_ref(), &problem.b);

    let floor = if cfg.is_theory() {
        resolve_floor(cfg, &problem.b, d, k, solver_cfg)?
    } else {
        1.0
    };
    let (plan, bound) = build_plan(cfg, floor, k, false)?;
    let t_max = bound.unwrap_or(usize::MAX).min(cfg.max_outer_iterations);

    let init = random_gaussian_matrix(d, k, cfg.rng_seed);
    let gs0 = gs_b(&problem.b, init.view())?;
    let mut q = gs0.q;
    let mut bq = gs0.bq;
    let mut aw = problem.a.apply_matrix(q.basis().view())?;

    let mut trace = ConvergenceTrace::default();
    let push_entry = |t: usize,
                      q: &Subspace,
                      bq: &Array2<f64>,
                      aw: &Array2<f64>,
                      report: SolveReport,
                      delta: Option<f64>,
                      prenorm: Option<&Array2<f64>>,
                      trace: &mut ConvergenceTrace|
     -> Result<(f64, Array2<f64>)> {
        let g = q.basis().t().dot(bq);
        let gamma = solve_gamma(&g, &q.basis().t().dot(aw))?;
        let sin = match reference {
            Some(r) => Some(sin_against(r, bq)?),
            None => None,
        };
        let (apps, flops) = meter.cumulative();
        trace.entries.push(TraceEntry {
            outer_iteration: t,
            rayleigh: gamma.clone(),
            inner_report: report,
            sin_theta: sin,
            delta_used: delta,
            cumulative_operator_applications: apps,
            cumulative_flop_proxy: flops,
            iterate: cfg.keep_iterates.then(|| q.basis().clone()),
            prenormalization: prenorm.filter(|_| cfg.keep_iterates).cloned(),
        });
        Ok((sin.unwrap_or(f64::INFINITY), gamma))
    };

    let (mut sin_now, mut gamma) =
        push_entry(0, &q, &bq, &aw, ZERO_REPORT, None, None, &mut trace)?;
    let mut stop = if t_max == 0 {
        StopReason::IterationBoundReached
    } else {
        StopReason::OuterBudgetExhausted
    };
    if reference.is_some() && sin_now <= cfg.epsilon {
        stop = StopReason::ReferenceConverged;
    } else {
        let mut streak = 0usize;
        for t in 0..t_max {
            let delta = plan.at(t);
            let warm = q.basis().dot(&gamma);
            let solves: Vec<Result<(Array1<f64>, SolveReport)>> = (0..k)
                .into_par_iter()
                .map(|j| {
                    let obj =
                        QuadraticObjective::new(problem.b.clone(), aw.column(j).to_owned())?;
                    solve_spd(&obj, warm.column(j), delta, solver_cfg)
                })
                .collect();
            let mut w_tilde = Array2::zeros((d, k));
            let mut reports = Vec::with_capacity(k);
            for (j, res) in solves.into_iter().enumerate() {
                let (col, report) = res?;
                w_tilde.column_mut(j).assign(&col);
                reports.push(report);
            }

            let gs = gs_b(&problem.b, w_tilde.view())?;
            let prev_basis = std::mem::replace(&mut q, gs.q).basis().clone();
            bq = gs.bq;
            aw = problem.a.apply_matrix(q.basis().view())?;

            let (s, g) = push_entry(
                t + 1,
                &q,
                &bq,
                &aw,
                merge_reports(&reports),
                Some(delta),
                Some(&gs.r),
                &mut trace,
            )?;
            sin_now = s;
            gamma = g;

            if reference.is_some() && sin_now <= cfg.epsilon {
                stop = StopReason::ReferenceConverged;
                break;
            }
            if !cfg.is_theory() {
                let gram = prev_basis.t().dot(&bq);
                let sv = oracle::singular_values(gram.view())?;
                let cos_step = sv[sv.len() - 1].clamp(0.0, 1.0);
                let sin_step = (1.0 - cos_step * cos_step).max(0.0).sqrt();
                if sin_step < cfg.epsilon {
                    streak += 1;
                    if streak >= STAGNATION_STREAK {
                        stop = StopReason::Stagnated;
                        break;
                    }
                } else {
                    streak = 0;
                }
            }
            if t + 1 == t_max && bound.map_or(false, |tb| tb <= t_max) {
                stop = StopReason::IterationBoundReached;
            }
        }
    }

    // Ritz extraction from the cached A·W: rotate the basis so columns are
    // individual eigenvector estimates ordered by |Ritz value| descending.
    let mut gram_a = q.basis().t().dot(&aw);
    let ga_t = gram_a.t().to_owned();
    gram_a += &ga_t;
    gram_a *= 0.5;
    let (ritz_vals, rot) = oracle::dense_symmetric_eig(gram_a.view())?;
    let rotated = q.basis().dot(&rot);
    let subspace = Subspace::assume_orthonormal(rotated, &problem.b);

    Ok(TopkResult {
        subspace,
        eigenvalues: ritz_vals,
        outer_iterations: trace.len() - 1,
        stop,
        trace,
    })
}

/// Solves the SPD system M·x = m as a top-1 generalized eigenproblem on
/// the pair (m·mᵀ, M): the top eigenvector is parallel to M⁻¹m, and the
/// returned candidate is rescaled by (mᵀw)/(wᵀMw).
///
/// The pair's trailing spectrum vanishes, so theory mode applies with
/// ρ = 1; practical-mode configs run unchanged.
pub fn solve_linear_system_via_geneig(
    m_op: &SpdOperator,
    m: ArrayView1<f64>,
    cfg: &GenEigConfig,
    solver_cfg: &SolverConfig,
) -> Result<Array1<f64>> {
    let d = m_op.dim();
    if m.len() != d {
        return Err(Error::DimensionMismatch { expected: d, found: m.len() });
    }
    let m_norm = m.dot(&m).sqrt();
    if !(m_norm > 0.0) {
        return Err(Error::InvalidConfig("right-hand side must be nonzero".into()));
    }
    let a = Arc::new(crate::linops::Rank1Operator::new(m.to_owned()));
    let problem = GenEigProblem::new(a, m_op.clone(), 1)?;
    let result = genelin(&problem, cfg, solver_cfg, None)?;
    let w = result.w;
    let mw = m_op.apply(w.view())?;
    let scale = m.dot(&w) / w.dot(&mw);
    Ok(&w * scale)
}
