//! The three computational run modes: eigenpair runs, CCA runs, and the
//! GD-vs-AGD FLOP-proxy benchmark.
//!
//! Synthetic runs know their answer, so their traces carry sin θ against
//! the planted subspace and (for CCA) per-iterate TCC/PCC against the
//! planted directions. File-based runs have no reference; those metric
//! columns stay empty.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use ndarray::{s, Array1, Array2, Axis};

use geneig::cca::project_block_iterate;
use geneig::io::{read_dense_csv, read_matrix_market, write_dense_csv};
use geneig::synth::SpectrumSpec;
use geneig::{
    ccalin, generate_cca, generate_geneig, genelin, genelink, pcc, tcc, CcaDataset, CcaResult,
    ConvergenceTrace, DataMatrix, GenEigProblem, GeneigSpec, LinearOperator, SolveMethod,
    SolverConfig, SpdOperator, StopReason, Subspace,
};

use crate::config::{synth_cca_spec, synth_geneig_spec, CliError, RunConfig};
use crate::trace::{rows_from_trace, write_summary, write_trace, Summary};

/// Matches the seed offset ccalin uses for its final projection, so the
/// last trace row's TCC equals the reported result's.
const PROJECTION_SEED_OFFSET: u64 = 0x5072_6f6a;

/// Io errors from the core carry no path; Parse errors already do.
fn annotate(e: geneig::Error, path: &Path) -> CliError {
    match e {
        geneig::Error::Io(io) => CliError::Run(format!("{}: {io}", path.display())),
        other => other.into(),
    }
}

/// ρ and γ implied by a known spectrum at width k, for auto-filling
/// theory-mode hints on synthetic runs. Magnitudes are descending; a
/// missing tail eigenvalue counts as zero (ρ = 1).
fn hints_from_lambdas(lambdas: &Array1<f64>, k: usize) -> (Option<f64>, Option<f64>) {
    if k == 0 || k > lambdas.len() {
        return (None, None);
    }
    let lk = lambdas[k - 1].abs();
    if lk <= 0.0 {
        return (None, None);
    }
    let next = if k < lambdas.len() { lambdas[k].abs() } else { 0.0 };
    (Some(1.0 - next / lk), Some(lambdas[0].abs() / lk))
}

/// Identical logic on planted canonical correlations: the CCA block pair's
/// spectrum is ±(the correlations), so the 2k-wide run sees relative gap
/// 1 − c_{k+1}/c_k and spread c₁/c_k.
fn hints_from_correlations(c: &Array1<f64>, k: usize) -> (Option<f64>, Option<f64>) {
    if k == 0 || k > c.len() {
        return (None, None);
    }
    let ck = c[k - 1];
    if ck <= 0.0 {
        return (None, None);
    }
    let next = if k < c.len() { c[k] } else { 0.0 };
    (Some(1.0 - next / ck), Some(c[0] / ck))
}

/// Shared shape of the two eigenpair paths.
struct EigRun {
    basis: Array2<f64>,
    values: Array1<f64>,
    iters: usize,
    stop: StopReason,
    trace: ConvergenceTrace,
}

fn run_eig_path(
    problem: &GenEigProblem,
    gcfg: &geneig::GenEigConfig,
    scfg: &SolverConfig,
    reference: Option<&Subspace>,
) -> Result<EigRun, CliError> {
    if problem.k() == 1 {
        let r = genelin(problem, gcfg, scfg, reference)?;
        Ok(EigRun {
            basis: r.w.view().insert_axis(Axis(1)).to_owned(),
            values: Array1::from_vec(vec![r.eigenvalue]),
            iters: r.outer_iterations,
            stop: r.stop,
            trace: r.trace,
        })
    } else {
        let r = genelink(problem, gcfg, scfg, reference)?;
        Ok(EigRun {
            basis: r.subspace.basis().to_owned(),
            values: r.eigenvalues,
            iters: r.outer_iterations,
            stop: r.stop,
            trace: r.trace,
        })
    }
}

pub fn run_geneig(cfg: &RunConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let (a, b, reference, lambdas): (
        Arc<dyn LinearOperator>,
        SpdOperator,
        Option<Subspace>,
        Option<Array1<f64>>,
    ) = if let (Some(pa), Some(pb)) = (&cfg.a, &cfg.b) {
        let a = read_matrix_market(pa).map_err(|e| annotate(e, pa))?;
        let bm = read_matrix_market(pb).map_err(|e| annotate(e, pb))?;
        (
            Arc::new(a) as Arc<dyn LinearOperator>,
            SpdOperator::new(Arc::new(bm)),
            None,
            None,
        )
    } else {
        let spec = synth_geneig_spec(cfg.synthetic.as_ref().unwrap(), cfg.seed)?;
        let inst = generate_geneig(&spec)?;
        let r = inst.top_subspace(cfg.k)?;
        (inst.a.clone(), inst.b.clone(), Some(r), Some(inst.lambdas))
    };

    let (rho_auto, gamma_auto) = match &lambdas {
        Some(l) => hints_from_lambdas(l, cfg.k),
        None => (None, None),
    };
    let gcfg = cfg.geneig_config(rho_auto, gamma_auto)?;
    let scfg = cfg.solver_config();
    let problem = GenEigProblem::new(a, b, cfg.k)?;
    let run = run_eig_path(&problem, &gcfg, &scfg, reference.as_ref())?;

    write_trace(&cfg.out.join("trace.csv"), &rows_from_trace(&run.trace))?;
    let vectors = cfg.out.join("vectors.csv");
    write_dense_csv(&vectors, run.basis.view()).map_err(|e| annotate(e, &vectors))?;
    let values_path = cfg.out.join("values.csv");
    write_dense_csv(&values_path, run.values.view().insert_axis(Axis(1)))
        .map_err(|e| annotate(e, &values_path))?;

    let sin_final = run.trace.last().and_then(|e| e.sin_theta);
    write_summary(
        &cfg.out.join("summary.json"),
        &Summary {
            mode: "geneig",
            k: cfg.k,
            iters: run.iters,
            sin_theta: sin_final,
            correlations: None,
            op_apps: run.trace.total_operator_applications(),
            flop_proxy: run.trace.total_flop_proxy(),
            wall_ms: started.elapsed().as_millis(),
        },
    )?;
    match sin_final {
        Some(sin) => println!(
            "geneig: k={} stop={} iters={} sin_theta={sin:.3e}",
            cfg.k, run.stop, run.iters
        ),
        None => println!("geneig: k={} stop={} iters={}", cfg.k, run.stop, run.iters),
    }
    Ok(())
}

pub fn run_cca(cfg: &RunConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let k = cfg.k;
    struct Refs {
        block: Array2<f64>,
        planted: CcaResult,
    }
    let (ds, refs, correlations_all): (Arc<CcaDataset>, Option<Refs>, Option<Array1<f64>>) =
        if let (Some(px), Some(py)) = (&cfg.x, &cfg.y) {
            let x = read_dense_csv(px).map_err(|e| annotate(e, px))?;
            let y = read_dense_csv(py).map_err(|e| annotate(e, py))?;
            let ds = Arc::new(CcaDataset::new(
                DataMatrix::Dense(x),
                DataMatrix::Dense(y),
                cfg.reg_x,
                cfg.reg_y,
            )?);
            (ds, None, None)
        } else {
            let spec = synth_cca_spec(cfg.synthetic.as_ref().unwrap(), cfg.seed)?;
            let inst = generate_cca(&spec)?;
            let block = inst.block_reference(k)?;
            let planted = CcaResult {
                wx: inst.phi.slice(s![.., ..k]).to_owned(),
                wy: inst.psi.slice(s![.., ..k]).to_owned(),
                correlations: inst.correlations.slice(s![..k]).to_owned(),
            };
            let all = inst.correlations.clone();
            (inst.dataset.clone(), Some(Refs { block, planted }), Some(all))
        };

    let (rho_auto, gamma_auto) = match &correlations_all {
        Some(c) => hints_from_correlations(c, k),
        None => (None, None),
    };
    let mut gcfg = cfg.geneig_config(rho_auto, gamma_auto)?;
    // Per-iterate TCC/PCC need the iterates themselves.
    gcfg.keep_iterates = refs.is_some();
    let scfg = cfg.solver_config();

    let (result, trace) = ccalin(
        &ds,
        k,
        &gcfg,
        &scfg,
        refs.as_ref().map(|r| r.block.view()),
    )?;

    let mut rows = rows_from_trace(&trace.outer);
    if let Some(r) = &refs {
        let proj_seed = cfg.seed.wrapping_add(PROJECTION_SEED_OFFSET);
        for (row, entry) in rows.iter_mut().zip(&trace.outer.entries) {
            let Some(basis) = entry.iterate.as_ref() else {
                continue;
            };
            let Ok((res_t, _)) = project_block_iterate(&ds, basis.view(), k, proj_seed) else {
                continue;
            };
            let xp = ds.x().project(res_t.wx.view());
            let yp = ds.y().project(res_t.wy.view());
            row.tcc = tcc(xp.view(), yp.view()).ok();
            row.pcc = pcc(&res_t, &r.planted, &ds).ok();
        }
    }
    write_trace(&cfg.out.join("trace.csv"), &rows)?;

    let wx_path = cfg.out.join("wx.csv");
    write_dense_csv(&wx_path, result.wx.view()).map_err(|e| annotate(e, &wx_path))?;
    let wy_path = cfg.out.join("wy.csv");
    write_dense_csv(&wy_path, result.wy.view()).map_err(|e| annotate(e, &wy_path))?;

    let iters = trace.outer.last().map_or(0, |e| e.outer_iteration);
    let sin_final = trace.outer.last().and_then(|e| e.sin_theta);
    let corr_slice = result.correlations.as_slice().unwrap_or(&[]);
    write_summary(
        &cfg.out.join("summary.json"),
        &Summary {
            mode: "cca",
            k,
            iters,
            sin_theta: sin_final,
            correlations: Some(corr_slice),
            op_apps: trace.outer.total_operator_applications(),
            flop_proxy: trace.outer.total_flop_proxy(),
            wall_ms: started.elapsed().as_millis(),
        },
    )?;
    println!(
        "cca: k={k} iters={iters} projection_attempts={} correlations={:?}",
        trace.projection_attempts,
        corr_slice
    );
    Ok(())
}

pub fn run_bench(cfg: &RunConfig) -> Result<(), CliError> {
    let started = Instant::now();
    let spec = match &cfg.synthetic {
        Some(s) => synth_geneig_spec(s, cfg.seed)?,
        // Default comparison instance: ill-conditioned metric, clean gap.
        None => GeneigSpec {
            d: 100,
            spectrum: SpectrumSpec::Planted {
                k: cfg.k,
                rho: 0.4,
                gamma: 1.0,
            },
            kappa_b: 100.0,
            seed: cfg.seed,
        },
    };
    let inst = generate_geneig(&spec)?;
    let reference = inst.top_subspace(cfg.k)?;
    let (rho_auto, gamma_auto) = hints_from_lambdas(&inst.lambdas, cfg.k);
    let gcfg = cfg.geneig_config(rho_auto, gamma_auto)?;

    let mut measured: Vec<(&str, EigRun)> = Vec::new();
    for (method, label) in [(SolveMethod::Gd, "gd"), (SolveMethod::Agd, "agd")] {
        let scfg = SolverConfig {
            method,
            max_inner_iterations: cfg.max_inner,
            ..SolverConfig::default()
        };
        let problem = GenEigProblem::new(inst.a.clone(), inst.b.clone(), cfg.k)?;
        let run = run_eig_path(&problem, &gcfg, &scfg, Some(&reference))?;
        write_trace(
            &cfg.out.join(format!("trace_{label}.csv")),
            &rows_from_trace(&run.trace),
        )?;
        measured.push((label, run));
    }

    let side = |run: &EigRun| {
        serde_json::json!({
            "iters": run.iters,
            "stop": run.stop.to_string(),
            "sin_theta": run.trace.last().and_then(|e| e.sin_theta),
            "op_apps": run.trace.total_operator_applications(),
            "flop_proxy": run.trace.total_flop_proxy(),
        })
    };
    let gd = &measured[0].1;
    let agd = &measured[1].1;
    let gd_flops = gd.trace.total_flop_proxy();
    let agd_flops = agd.trace.total_flop_proxy();
    let ratio = if gd_flops > 0.0 { agd_flops / gd_flops } else { f64::NAN };
    let body = serde_json::json!({
        "epsilon": cfg.epsilon,
        "k": cfg.k,
        "gd": side(gd),
        "agd": side(agd),
        "flop_ratio_agd_over_gd": ratio,
    });
    let bench_path = cfg.out.join("bench.json");
    let text = serde_json::to_string_pretty(&body)
        .map_err(|e| CliError::Run(format!("bench serialization: {e}")))?;
    std::fs::write(&bench_path, text + "\n")
        .map_err(|e| CliError::Run(format!("{}: {e}", bench_path.display())))?;

    write_summary(
        &cfg.out.join("summary.json"),
        &Summary {
            mode: "bench",
            k: cfg.k,
            iters: agd.iters,
            sin_theta: agd.trace.last().and_then(|e| e.sin_theta),
            correlations: None,
            op_apps: agd.trace.total_operator_applications(),
            flop_proxy: agd_flops,
            wall_ms: started.elapsed().as_millis(),
        },
    )?;
    println!(
        "bench: gd flop_proxy={gd_flops} ({}), agd flop_proxy={agd_flops} ({}), agd/gd={ratio:.4}",
        gd.stop, agd.stop
    );
    Ok(())
}
