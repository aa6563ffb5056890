//! Embedded invariant suite: quick, deterministic checks of the library's
//! core identities, runnable on any install without fixtures. One line per
//! check; any failure exits nonzero.

use std::sync::Arc;

use ndarray::{Array1, Array2};

use geneig::oracle;
use geneig::synth::CcaMode;
use geneig::{
    ccalin, generate_cca, genelin, gs_b, iteration_bound, random_gaussian_matrix,
    required_iterations, tolerance_schedule, CcaDataset, CcaSpec, DataMatrix,
    DenseSymmetricOperator, GenEigConfig, GenEigProblem, SchedulePhase, SolveMethod, SolverConfig,
    SpdOperator, StopReason, Subspace,
};

use crate::config::CliError;

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn inner_iteration_counts() -> Result<(), String> {
    let agd = required_iterations(100.0, 1e-3, SolveMethod::Agd).map_err(|e| e.to_string())?;
    let gd = required_iterations(100.0, 1e-3, SolveMethod::Gd).map_err(|e| e.to_string())?;
    let expected_agd = (10.0f64 * (2.0f64 / 1e-3).ln()).ceil() as usize;
    let expected_gd = (100.0f64 * (2.0f64 / 1e-3).ln()).ceil() as usize;
    check(agd == expected_agd, format!("agd count {agd} != {expected_agd}"))?;
    check(gd == expected_gd, format!("gd count {gd} != {expected_gd}"))?;
    check(agd <= gd, format!("agd {agd} should not exceed gd {gd}"))
}

fn tolerance_schedule_values() -> Result<(), String> {
    let t1 = tolerance_schedule(SchedulePhase::Top1Initial, 0.4, 1.0, 1, 1.0)
        .map_err(|e| e.to_string())?;
    check((t1 - 0.01).abs() < 1e-15, format!("top-1 initial {t1} != 0.01"))?;
    let tk = tolerance_schedule(SchedulePhase::TopkInitial, 0.4, 2.0, 2, 0.5)
        .map_err(|e| e.to_string())?;
    let expected = 0.4f64 * 0.4 * 0.5f64.powi(4) / (64.0 * 2.0 * 4.0);
    check(
        (tk - expected).abs() < 1e-18,
        format!("top-k initial {tk} != {expected}"),
    )
}

fn iteration_bound_examples() -> Result<(), String> {
    let t = iteration_bound(0.5, 0.1, 1.0).map_err(|e| e.to_string())?;
    check(t == 10, format!("bound {t} != 10"))?;
    let zero = iteration_bound(0.5, 1.5, 1.0).map_err(|e| e.to_string())?;
    check(zero == 0, format!("already-converged bound {zero} != 0"))
}

fn diagonal_top1() -> Result<(), String> {
    let a_dense = Array2::from_diag(&Array1::from_vec(vec![2.0, 1.0, 0.5]));
    let a = Arc::new(DenseSymmetricOperator::new(a_dense).map_err(|e| e.to_string())?);
    let b = SpdOperator::with_hints(
        Arc::new(DenseSymmetricOperator::new(Array2::eye(3)).map_err(|e| e.to_string())?),
        1.0,
        1.0,
    )
    .map_err(|e| e.to_string())?;
    let mut e1 = Array2::zeros((3, 1));
    e1[[0, 0]] = 1.0;
    let reference = Subspace::assume_orthonormal(e1, &b);
    let problem = GenEigProblem::new(a, b, 1).map_err(|e| e.to_string())?;
    let mut cfg = GenEigConfig::theory(1e-8, 0.5);
    cfg.rng_seed = 1;
    let r = genelin(&problem, &cfg, &SolverConfig::default(), Some(&reference))
        .map_err(|e| e.to_string())?;
    check(
        r.stop == StopReason::ReferenceConverged,
        format!("stop {} != reference_converged", r.stop),
    )?;
    check(
        (r.eigenvalue - 2.0).abs() <= 1e-6,
        format!("eigenvalue {} != 2", r.eigenvalue),
    )
}

fn metric_orthonormalization() -> Result<(), String> {
    let d = 12;
    let g = random_gaussian_matrix(d, d, 5);
    let b_dense = g.dot(&g.t()) + Array2::<f64>::eye(d) * d as f64;
    let b = SpdOperator::new(Arc::new(
        DenseSymmetricOperator::new(b_dense.clone()).map_err(|e| e.to_string())?,
    ));
    let w = random_gaussian_matrix(d, 3, 6);
    let gs = gs_b(&b, w.view()).map_err(|e| e.to_string())?;
    let gram = gs.q.basis().t().dot(&b_dense.dot(gs.q.basis()));
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 1.0 } else { 0.0 };
            check(
                (gram[[i, j]] - want).abs() <= 1e-10,
                format!("gram[{i},{j}] = {}", gram[[i, j]]),
            )?;
        }
    }
    let qr = gs.q.basis().dot(&gs.r);
    let scale = w.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    for (got, want) in qr.iter().zip(w.iter()) {
        check(
            (got - want).abs() <= 1e-10 * scale,
            format!("QR reconstruction off by {}", (got - want).abs()),
        )?;
    }
    Ok(())
}

fn identical_views_correlate_fully() -> Result<(), String> {
    let x = random_gaussian_matrix(30, 3, 7);
    let ds = CcaDataset::new(
        DataMatrix::Dense(x.clone()),
        DataMatrix::Dense(x),
        Some(0.0),
        Some(0.0),
    )
    .map_err(|e| e.to_string())?;
    let r = oracle::dense_cca(&ds, 3).map_err(|e| e.to_string())?;
    for (i, c) in r.correlations.iter().enumerate() {
        check(*c >= 1.0 - 1e-8, format!("self-correlation {i} is {c}"))?;
    }
    Ok(())
}

fn planted_correlation_recovered() -> Result<(), String> {
    let spec = CcaSpec {
        n: 40,
        d1: 4,
        d2: 3,
        correlations: vec![0.9, 0.5],
        mode: CcaMode::PopulationExact,
        mix_x: false,
        seed: 11,
    };
    let inst = generate_cca(&spec).map_err(|e| e.to_string())?;
    let mut cfg = GenEigConfig::practical(1e-6);
    cfg.rng_seed = 8;
    let (result, _) = ccalin(&inst.dataset, 1, &cfg, &SolverConfig::default(), None)
        .map_err(|e| e.to_string())?;
    check(
        (result.correlations[0] - 0.9).abs() <= 1e-3,
        format!("recovered correlation {} != 0.9", result.correlations[0]),
    )
}

fn block_spectrum_symmetry() -> Result<(), String> {
    let (n, d1, d2) = (40, 5, 4);
    let ds = CcaDataset::new(
        DataMatrix::Dense(random_gaussian_matrix(n, d1, 9)),
        DataMatrix::Dense(random_gaussian_matrix(n, d2, 10)),
        None,
        None,
    )
    .map_err(|e| e.to_string())?;
    let d = d1 + d2;
    let sxy = ds.cross_covariance_dense();
    let mut a = Array2::<f64>::zeros((d, d));
    a.slice_mut(ndarray::s![..d1, d1..]).assign(&sxy);
    a.slice_mut(ndarray::s![d1.., ..d1]).assign(&sxy.t());
    let mut b = Array2::<f64>::zeros((d, d));
    b.slice_mut(ndarray::s![..d1, ..d1])
        .assign(&ds.metric_xx_dense());
    b.slice_mut(ndarray::s![d1.., d1..])
        .assign(&ds.metric_yy_dense());
    let (lambdas, _) =
        oracle::dense_generalized_eig(a.view(), b.view()).map_err(|e| e.to_string())?;
    let mut sorted: Vec<f64> = lambdas.to_vec();
    sorted.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let scale = sorted.iter().fold(1.0f64, |m, &v| m.max(v.abs()));
    for i in 0..d {
        let sum = sorted[i] + sorted[d - 1 - i];
        check(
            sum.abs() <= 1e-9 * scale,
            format!("spectrum asymmetric: {} vs {}", sorted[i], sorted[d - 1 - i]),
        )?;
    }
    Ok(())
}

pub fn run_selftest() -> Result<(), CliError> {
    let checks: &[(&str, fn() -> Result<(), String>)] = &[
        ("inner_iteration_counts", inner_iteration_counts),
        ("tolerance_schedule_values", tolerance_schedule_values),
        ("iteration_bound_examples", iteration_bound_examples),
        ("diagonal_top1", diagonal_top1),
        ("metric_orthonormalization", metric_orthonormalization),
        ("identical_views_correlate_fully", identical_views_correlate_fully),
        ("planted_correlation_recovered", planted_correlation_recovered),
        ("block_spectrum_symmetry", block_spectrum_symmetry),
    ];
    let mut failed = 0usize;
    for (name, f) in checks {
        match f() {
            Ok(()) => println!("ok {name}"),
            Err(msg) => {
                failed += 1;
                println!("FAILED {name}: {msg}");
            }
        }
    }
    if failed > 0 {
        Err(CliError::Run(format!("{failed} selftest check(s) failed")))
    } else {
        println!("selftest: {} checks passed", checks.len());
        Ok(())
    }
}
