//! End-to-end CCA on generated datasets with planted correlations: recovery
//! accuracy, the block-pair eigenstructure, the random-projection angle
//! bound, and the captured/relative correlation metrics.

use ndarray::{s, Array1, Array2};

use geneig::cca::project_block_iterate;
use geneig::oracle;
use geneig::synth::{CcaMode, CcaSpec};
use geneig::{
    build_cca_operators, ccalin, generate_cca, gs_b, pcc, random_gaussian_matrix, tcc,
    CcaInstance, CcaResult, GenEigConfig, SolverConfig,
};

fn planted_cca(
    n: usize,
    d1: usize,
    d2: usize,
    correlations: &[f64],
    mix_x: bool,
    seed: u64,
) -> CcaInstance {
    generate_cca(&CcaSpec {
        n,
        d1,
        d2,
        correlations: correlations.to_vec(),
        mode: CcaMode::PopulationExact,
        mix_x,
        seed,
    })
    .unwrap()
}

/// sin of the largest principal angle between a true direction block and a
/// recovered one, both orthonormal under the same per-view metric.
fn view_angle(truth: &Array2<f64>, metric: &Array2<f64>, w: &Array2<f64>) -> f64 {
    let gram = truth.t().dot(&metric.dot(w));
    let sv = oracle::singular_values(gram.view()).unwrap();
    let cos = sv[sv.len() - 1].clamp(0.0, 1.0);
    (1.0 - cos * cos).max(0.0).sqrt()
}

#[test]
fn planted_correlations_recovered_to_three_digits() {
    let inst = planted_cca(500, 20, 20, &[0.9, 0.7, 0.5], false, 101);
    let ds = &inst.dataset;
    let k = 2;
    // Block spectrum is ±the planted correlations, so the top-2k gap sits
    // between 0.7 and 0.5.
    let mut cfg = GenEigConfig::theory(1e-7, 1.0 - 5.0 / 7.0);
    cfg.gamma_hint = Some(9.0 / 7.0);
    cfg.rng_seed = 3;
    let reference = inst.block_reference(k).unwrap();
    let (result, trace) = ccalin(
        ds,
        k,
        &cfg,
        &SolverConfig::default(),
        Some(reference.view()),
    )
    .unwrap();
    assert_eq!(trace.projection_attempts, 1);

    let planted = [0.9, 0.7];
    for i in 0..k {
        assert!(
            (result.correlations[i] - planted[i]).abs() <= 1e-3,
            "correlation {i}: {} vs planted {}",
            result.correlations[i],
            planted[i]
        );
        assert!(result.correlations[i] >= -1.0 - 1e-8);
        assert!(result.correlations[i] <= 1.0 + 1e-8);
    }

    let sxx = ds.metric_xx_dense();
    let syy = ds.metric_yy_dense();
    let phi_k = inst.phi.slice(s![.., ..k]).to_owned();
    let psi_k = inst.psi.slice(s![.., ..k]).to_owned();
    let sin_x = view_angle(&phi_k, &sxx, &result.wx);
    let sin_y = view_angle(&psi_k, &syy, &result.wy);
    assert!(sin_x <= 1e-4, "x-view angle {sin_x:e}");
    assert!(sin_y <= 1e-4, "y-view angle {sin_y:e}");

    let oracle_ref = oracle::dense_cca(ds, k).unwrap();
    let overlap = pcc(&result, &oracle_ref, ds).unwrap();
    assert!(overlap >= 0.999, "pcc = {overlap}");
}

#[test]
fn leading_block_eigenvectors_pair_the_planted_directions() {
    let inst = planted_cca(60, 6, 5, &[0.8, 0.6, 0.4], false, 211);
    let ds = &inst.dataset;
    let k = 2;
    let (d1, d2) = (ds.dx(), ds.dy());
    let d = d1 + d2;

    // Dense block pair assembled from the same covariances the operators
    // stream through.
    let sxy = ds.cross_covariance_dense();
    let mut a = Array2::zeros((d, d));
    a.slice_mut(s![..d1, d1..]).assign(&sxy);
    a.slice_mut(s![d1.., ..d1]).assign(&sxy.t());
    let mut b = Array2::zeros((d, d));
    b.slice_mut(s![..d1, ..d1]).assign(&ds.metric_xx_dense());
    b.slice_mut(s![d1.., d1..]).assign(&ds.metric_yy_dense());

    let (_, vecs) = oracle::dense_generalized_eig(a.view(), b.view()).unwrap();
    let top = vecs.slice(s![.., ..2 * k]).to_owned();
    let reference = inst.block_reference(k).unwrap();
    let (_, b_op) = build_cca_operators(ds);
    let angles = oracle::principal_angle(top.view(), reference.view(), &b_op).unwrap();
    assert!(
        angles.sin_theta <= 1e-8,
        "top-2k eigenvectors leave the paired-direction span by {:e}",
        angles.sin_theta
    );
}

#[test]
fn random_projection_keeps_both_view_angles_small() {
    let inst = planted_cca(50, 8, 8, &[0.9, 0.7, 0.4], false, 307);
    let ds = &inst.dataset;
    let k = 2;
    let zeta = 0.2;
    let c_bound = 100.0 * (k * k) as f64 / (zeta * zeta);
    let exact = inst.block_reference(k).unwrap();
    let (_, b_op) = build_cca_operators(ds);
    let sxx = ds.metric_xx_dense();
    let syy = ds.metric_yy_dense();
    let phi_k = inst.phi.slice(s![.., ..k]).to_owned();
    let psi_k = inst.psi.slice(s![.., ..k]).to_owned();

    let trials = 200usize;
    let mut successes = 0usize;
    for trial in 0..trials {
        // Perturb the exact invariant subspace to a small measured angle,
        // then project it down with a fresh Gaussian.
        let noise = random_gaussian_matrix(exact.nrows(), 2 * k, 40_000 + trial as u64);
        let perturbed = &exact + &(&noise * 2e-7);
        let basis = gs_b(&b_op, perturbed.view()).unwrap().q;
        let theta = oracle::principal_angle(basis.basis().view(), exact.view(), &b_op)
            .unwrap()
            .sin_theta
            .max(1e-12);
        assert!(theta <= 1e-5, "trial {trial} drifted to θ = {theta:e}");

        let (projected, _) =
            project_block_iterate(ds, basis.basis().view(), k, 90_000 + trial as u64).unwrap();
        let sin_x = view_angle(&phi_k, &sxx, &projected.wx);
        let sin_y = view_angle(&psi_k, &syy, &projected.wy);
        if sin_x <= c_bound * theta && sin_y <= c_bound * theta {
            successes += 1;
        }
    }
    assert!(
        successes >= (0.8 * trials as f64) as usize,
        "only {successes}/{trials} trials kept both view angles under the k²θ/ζ² bound"
    );
}

#[test]
fn unrelated_directions_score_low_overlap() {
    let inst = planted_cca(300, 10, 10, &[0.9, 0.6, 0.3], false, 401);
    let ds = &inst.dataset;
    let k = 2;
    let oracle_ref = oracle::dense_cca(ds, k).unwrap();
    let random = CcaResult {
        wx: random_gaussian_matrix(10, k, 991),
        wy: random_gaussian_matrix(10, k, 992),
        correlations: Array1::zeros(k),
    };
    let overlap = pcc(&random, &oracle_ref, ds).unwrap();
    assert!((0.0..1.0).contains(&overlap), "pcc = {overlap}");
    assert!(overlap < 0.9, "random directions scored {overlap}");
}

#[test]
fn progress_metric_trends_upward_along_the_run() {
    let inst = planted_cca(200, 10, 10, &[0.9, 0.6, 0.3], false, 503);
    let ds = &inst.dataset;
    let k = 2;
    let mut cfg = GenEigConfig::practical(1e-6);
    cfg.rng_seed = 12;
    cfg.keep_iterates = true;
    let (_, trace) = ccalin(ds, k, &cfg, &SolverConfig::default(), None).unwrap();
    let oracle_ref = oracle::dense_cca(ds, k).unwrap();

    // Re-project every recorded block iterate with one fixed seed so the
    // sequence differs only through the iterates themselves.
    let mut values = Vec::new();
    for entry in &trace.outer.entries {
        let basis = entry.iterate.as_ref().unwrap();
        let (projected, _) = project_block_iterate(ds, basis.view(), k, 777).unwrap();
        values.push(pcc(&projected, &oracle_ref, ds).unwrap());
    }
    assert!(values.len() >= 12, "trace too short: {}", values.len());
    // The random start and the first couple of mixing steps carry no trend
    // claim; from mid-run on the overlap climbs to 1 within jitter.
    let start = values.len() / 4;
    for t in start..values.len() - 1 {
        assert!(
            values[t + 1] >= values[t] - 0.02,
            "pcc fell from {} to {} at step {t}",
            values[t],
            values[t + 1]
        );
    }
    let last = *values.last().unwrap();
    assert!(last >= 0.98, "final pcc = {last}");
}

#[test]
fn captured_correlation_sums_planted_mass() {
    let inst = planted_cca(400, 12, 9, &[0.85, 0.55], false, 601);
    let ds = &inst.dataset;
    let k = 2;
    let mut cfg = GenEigConfig::practical(1e-8);
    cfg.rng_seed = 8;
    let reference = inst.block_reference(k).unwrap();
    let (result, _) = ccalin(
        ds,
        k,
        &cfg,
        &SolverConfig::default(),
        Some(reference.view()),
    )
    .unwrap();
    let xp = ds.x().project(result.wx.view());
    let yp = ds.y().project(result.wy.view());
    let captured = tcc(xp.view(), yp.view()).unwrap();
    assert!(
        (captured - 1.4).abs() <= 1e-2,
        "captured {captured} vs planted mass 1.4"
    );
}
