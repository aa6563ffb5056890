//! Synthetic problem instances with planted, exactly-known solutions.
//!
//! Eigenproblem instances are assembled as A = B^{1/2}·QΛQᵀ·B^{1/2} with
//! B = Q_B·D·Q_Bᵀ, so V = B^{-1/2}Q satisfies A·V = B·V·Λ and VᵀBV = I by
//! construction — the planted eigenpairs are exact up to roundoff, not up
//! to a solver tolerance. CCA instances plant empirical covariances
//! exactly: the data matrix is √n·Q_n·Σ^{1/2} for an orthonormal Q_n, so
//! ZᵀZ/n = Σ to machine precision and the canonical directions and
//! correlations are read off Σ directly.

use std::sync::Arc;

use ndarray::{s, Array1, Array2};

use crate::cca::{CcaDataset, DataMatrix};
use crate::error::{Error, Result};
use crate::linops::{
    random_gaussian_matrix, DenseSymmetricOperator, LinearOperator, SpdOperator, Subspace,
};
use crate::oracle;

/// Eigenvalue layout of a planted instance.
#[derive(Debug, Clone)]
pub enum SpectrumSpec {
    /// Eigenvalues exactly as given; must be sorted by descending magnitude.
    Explicit(Vec<f64>),
    /// Leading k values geometrically spaced from `gamma` down to 1, then a
    /// constant trailing plateau at magnitude 1−ρ with alternating signs —
    /// the relative gap at position k is exactly ρ and the leading spread
    /// is exactly γ.
    Planted { k: usize, rho: f64, gamma: f64 },
}

/// Recipe for a synthetic symmetric pair (A, B).
#[derive(Debug, Clone)]
pub struct GeneigSpec {
    pub d: usize,
    pub spectrum: SpectrumSpec,
    /// Condition number of B (its spectrum is log-spaced on [1, κ]).
    pub kappa_b: f64,
    pub seed: u64,
}

/// A generated pair with its exact solution.
pub struct GeneigInstance {
    pub a: Arc<dyn LinearOperator>,
    pub b: SpdOperator,
    pub a_dense: Array2<f64>,
    pub b_dense: Array2<f64>,
    /// d×d, column i is the eigenvector for `lambdas[i]`; VᵀBV = I.
    pub v_true: Array2<f64>,
    /// Descending by magnitude.
    pub lambdas: Array1<f64>,
}

impl GeneigInstance {
    /// The exact leading invariant subspace, tagged with this instance's
    /// metric so it can serve as a convergence reference.
    pub fn top_subspace(&self, k: usize) -> Result<Subspace> {
        if k == 0 || k > self.v_true.ncols() {
            return Err(Error::InvalidConfig(format!(
                "reference width {k} out of range for dimension {}",
                self.v_true.ncols()
            )));
        }
        Ok(Subspace::assume_orthonormal(
            self.v_true.slice(s![.., ..k]).to_owned(),
            &self.b,
        ))
    }
}

/// Random matrix with exactly orthonormal columns (Gaussian draw followed
/// by two Gram–Schmidt passes; the second pass scrubs the O(ε·cond) loss
/// of orthogonality the first leaves behind).
pub fn orthonormal_columns(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    assert!(cols <= rows, "cannot fit {cols} orthonormal columns in {rows} rows");
    let mut q = random_gaussian_matrix(rows, cols, seed);
    for _ in 0..2 {
        for j in 0..cols {
            for i in 0..j {
                let qi = q.column(i).to_owned();
                let proj = qi.dot(&q.column(j));
                q.column_mut(j).scaled_add(-proj, &qi);
            }
            let norm = q.column(j).dot(&q.column(j)).sqrt();
            assert!(norm > 1e-8, "degenerate Gaussian draw");
            q.column_mut(j).mapv_inplace(|v| v / norm);
        }
    }
    q
}

fn symmetrize(mut m: Array2<f64>) -> Array2<f64> {
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = avg;
            m[[j, i]] = avg;
        }
    }
    m
}

/// q·diag(w)·qᵀ.
fn rotate_diag(q: &Array2<f64>, w: &Array1<f64>) -> Array2<f64> {
    let mut scaled = q.clone();
    for (j, &wj) in w.iter().enumerate() {
        scaled.column_mut(j).mapv_inplace(|v| v * wj);
    }
    scaled.dot(&q.t())
}

fn planted_spectrum(d: usize, spec: &SpectrumSpec) -> Result<Array1<f64>> {
    match spec {
        SpectrumSpec::Explicit(vals) => {
            if vals.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: vals.len() });
            }
            for w in vals.windows(2) {
                if w[0].abs() < w[1].abs() {
                    return Err(Error::InvalidConfig(
                        "explicit spectrum must be sorted by descending magnitude".into(),
                    ));
                }
            }
            if !vals.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidConfig("explicit spectrum must be finite".into()));
            }
            Ok(Array1::from(vals.clone()))
        }
        SpectrumSpec::Planted { k, rho, gamma } => {
            if *k == 0 || *k > d {
                return Err(Error::InvalidConfig(format!(
                    "planted block width {k} out of range for dimension {d}"
                )));
            }
            if !(*rho > 0.0 && *rho <= 1.0) {
                return Err(Error::InvalidHint(format!(
                    "relative gap must lie in (0, 1], got {rho}"
                )));
            }
            if !(*gamma >= 1.0) {
                return Err(Error::InvalidHint(format!(
                    "leading spread must be at least 1, got {gamma}"
                )));
            }
            let mut vals = Array1::zeros(d);
            for i in 0..*k {
                let t = if *k == 1 { 0.0 } else { (*k - 1 - i) as f64 / (*k - 1) as f64 };
                vals[i] = gamma.powf(t);
            }
            let plateau = 1.0 - rho;
            for i in *k..d {
                vals[i] = if (i - *k) % 2 == 0 { plateau } else { -plateau };
            }
            Ok(vals)
        }
    }
}

/// Generates a symmetric pair with planted spectrum and exact κ(B).
pub fn generate_geneig(spec: &GeneigSpec) -> Result<GeneigInstance> {
    let d = spec.d;
    if d < 2 {
        return Err(Error::InvalidConfig(format!(
            "planted instances need dimension at least 2, got {d}"
        )));
    }
    if !(spec.kappa_b >= 1.0 && spec.kappa_b.is_finite()) {
        return Err(Error::InvalidHint(format!(
            "metric condition number must be finite and at least 1, got {}",
            spec.kappa_b
        )));
    }
    let lambdas = planted_spectrum(d, &spec.spectrum)?;

    // B = Q_B·diag(logspace(1, κ))·Q_Bᵀ: λ_min = 1 and λ_max = κ exactly.
    let qb = orthonormal_columns(d, d, spec.seed);
    let b_eigs: Array1<f64> = (0..d)
        .map(|i| spec.kappa_b.powf(i as f64 / (d - 1) as f64))
        .collect();
    let b_dense = symmetrize(rotate_diag(&qb, &b_eigs));
    let b_sqrt = rotate_diag(&qb, &b_eigs.mapv(f64::sqrt));
    let b_inv_sqrt = rotate_diag(&qb, &b_eigs.mapv(|v| 1.0 / v.sqrt()));

    let q = orthonormal_columns(d, d, spec.seed.wrapping_add(1));
    let core = rotate_diag(&q, &lambdas);
    let a_dense = symmetrize(b_sqrt.dot(&core).dot(&b_sqrt));
    let v_true = b_inv_sqrt.dot(&q);

    let a: Arc<dyn LinearOperator> = Arc::new(DenseSymmetricOperator::new(a_dense.clone())?);
    let b = SpdOperator::with_hints(
        Arc::new(DenseSymmetricOperator::new(b_dense.clone())?),
        spec.kappa_b,
        1.0,
    )?;
    Ok(GeneigInstance { a, b, a_dense, b_dense, v_true, lambdas })
}

/// How a CCA instance's data is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcaMode {
    /// Empirical covariances equal the planted Σ to machine precision.
    PopulationExact,
    /// Rows drawn i.i.d. N(0, Σ); empirical quantities carry O(1/√n) noise.
    Sampled,
}

/// Recipe for a paired dataset with planted canonical correlations.
#[derive(Debug, Clone)]
pub struct CcaSpec {
    pub n: usize,
    pub d1: usize,
    pub d2: usize,
    /// Values in [0, 1]; padded with zeros up to min(d1, d2). Stored and
    /// planted in descending order.
    pub correlations: Vec<f64>,
    pub mode: CcaMode,
    /// Post-multiply X by a random invertible mixing matrix (correlations
    /// are invariant; the true x-directions become the mixing inverse's
    /// columns).
    pub mix_x: bool,
    pub seed: u64,
}

/// A generated dataset with its exact solution.
pub struct CcaInstance {
    pub dataset: Arc<CcaDataset>,
    /// d1×m true x-directions (m = min(d1, d2)), S_xx-orthonormal.
    pub phi: Array2<f64>,
    /// d2×m true y-directions, S_yy-orthonormal.
    pub psi: Array2<f64>,
    /// Planted values, descending; length m.
    pub correlations: Array1<f64>,
}

impl CcaInstance {
    /// A (d1+d2)×2k block basis spanning the leading eigenspace of the
    /// block pair: columns (φᵢ; ψᵢ)/√2 and (−φᵢ; ψᵢ)/√2 for i < k.
    pub fn block_reference(&self, k: usize) -> Result<Array2<f64>> {
        let m = self.correlations.len();
        if k == 0 || k > m {
            return Err(Error::InvalidConfig(format!(
                "block reference width {k} out of range for {m} planted pairs"
            )));
        }
        let d1 = self.phi.nrows();
        let d2 = self.psi.nrows();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut basis = Array2::zeros((d1 + d2, 2 * k));
        for i in 0..k {
            for r in 0..d1 {
                basis[[r, 2 * i]] = inv_sqrt2 * self.phi[[r, i]];
                basis[[r, 2 * i + 1]] = -inv_sqrt2 * self.phi[[r, i]];
            }
            for r in 0..d2 {
                basis[[d1 + r, 2 * i]] = inv_sqrt2 * self.psi[[r, i]];
                basis[[d1 + r, 2 * i + 1]] = inv_sqrt2 * self.psi[[r, i]];
            }
        }
        Ok(basis)
    }
}

/// Generates a paired dataset with planted canonical correlations. The
/// dataset carries zero ridge so oracle recovery is exact in
/// population-exact mode.
pub fn generate_cca(spec: &CcaSpec) -> Result<CcaInstance> {
    let (n, d1, d2) = (spec.n, spec.d1, spec.d2);
    let m = d1.min(d2);
    if d1 == 0 || d2 == 0 {
        return Err(Error::InvalidConfig("views must have at least one feature".into()));
    }
    if n < d1 + d2 {
        return Err(Error::InvalidConfig(format!(
            "planting needs n ≥ d1+d2 = {}, got n = {n}",
            d1 + d2
        )));
    }
    if spec.correlations.len() > m {
        return Err(Error::InvalidConfig(format!(
            "at most min(d1, d2) = {m} correlations can be planted, got {}",
            spec.correlations.len()
        )));
    }
    if !spec.correlations.iter().all(|c| (0.0..=1.0).contains(c)) {
        return Err(Error::InvalidConfig(
            "planted correlations must lie in [0, 1]".into(),
        ));
    }
    let mut corr = vec![0.0; m];
    corr[..spec.correlations.len()].copy_from_slice(&spec.correlations);
    corr.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let corr = Array1::from(corr);

    // Σ = [[I, K], [Kᵀ, I]] with K = diag(correlations) in the top-left
    // m×m corner of the cross block.
    let d = d1 + d2;
    let mut sigma = Array2::eye(d);
    for i in 0..m {
        sigma[[i, d1 + i]] = corr[i];
        sigma[[d1 + i, i]] = corr[i];
    }
    let (svals, svecs) = oracle::dense_symmetric_eig(sigma.view())?;
    let mut sigma_sqrt = Array2::zeros((d, d));
    for i in 0..d {
        let w = svals[i].max(0.0).sqrt();
        let vi = svecs.column(i);
        for r in 0..d {
            for c in 0..d {
                sigma_sqrt[[r, c]] += w * vi[r] * vi[c];
            }
        }
    }

    let z = match spec.mode {
        CcaMode::PopulationExact => {
            // Z = √n·Q_n·Σ^{1/2} ⇒ ZᵀZ/n = Σ exactly.
            let qn = orthonormal_columns(n, d, spec.seed);
            qn.dot(&sigma_sqrt) * (n as f64).sqrt()
        }
        CcaMode::Sampled => random_gaussian_matrix(n, d, spec.seed).dot(&sigma_sqrt),
    };
    let mut x = z.slice(s![.., ..d1]).to_owned();
    let y = z.slice(s![.., d1..]).to_owned();

    // In the unmixed frame S_xx = S_yy = I, so the canonical directions
    // are the leading standard basis vectors.
    let mut phi = Array2::zeros((d1, m));
    let mut psi = Array2::zeros((d2, m));
    for i in 0..m {
        phi[[i, i]] = 1.0;
        psi[[i, i]] = 1.0;
    }

    if spec.mix_x {
        // G = Q₁·D·Q₂ᵀ with a modest diagonal; its inverse comes from the
        // same factors, so the planted directions stay exact.
        let q1 = orthonormal_columns(d1, d1, spec.seed.wrapping_add(7));
        let q2 = orthonormal_columns(d1, d1, spec.seed.wrapping_add(8));
        let dvals: Array1<f64> = (0..d1)
            .map(|i| 0.5 * 4.0f64.powf(if d1 == 1 { 0.0 } else { i as f64 / (d1 - 1) as f64 }))
            .collect();
        let g = rotate_diag2(&q1, &dvals, &q2);
        let g_inv = rotate_diag2(&q2, &dvals.mapv(|v| 1.0 / v), &q1);
        x = x.dot(&g);
        phi = g_inv.dot(&phi);
    }

    let dataset = Arc::new(CcaDataset::new(
        DataMatrix::Dense(x),
        DataMatrix::Dense(y),
        Some(0.0),
        Some(0.0),
    )?);
    Ok(CcaInstance { dataset, phi, psi, correlations: corr })
}

/// q1·diag(w)·q2ᵀ.
fn rotate_diag2(q1: &Array2<f64>, w: &Array1<f64>, q2: &Array2<f64>) -> Array2<f64> {
    let mut scaled = q1.clone();
    for (j, &wj) in w.iter().enumerate() {
        scaled.column_mut(j).mapv_inplace(|v| v * wj);
    }
    scaled.dot(&q2.t())
}
