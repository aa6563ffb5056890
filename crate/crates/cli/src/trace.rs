//! Trace CSV and summary JSON emission.
//!
//! The CSV layout is fixed so downstream plotting can rely on it; metric
//! cells are left empty whenever the run had no reference to measure
//! against. All floats print through Rust's shortest-roundtrip formatter,
//! which keeps equal-seed runs byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use geneig::ConvergenceTrace;

use crate::config::CliError;

pub const TRACE_HEADER: &str = "iter,inner_iters,cum_op_apps,flop_proxy,sin_theta,tcc,pcc";

pub struct TraceRow {
    pub iter: usize,
    pub inner_iters: usize,
    pub cum_op_apps: u64,
    pub flop_proxy: f64,
    pub sin_theta: Option<f64>,
    pub tcc: Option<f64>,
    pub pcc: Option<f64>,
}

/// One CSV row per trace entry; correlation cells start empty.
pub fn rows_from_trace(trace: &ConvergenceTrace) -> Vec<TraceRow> {
    trace
        .entries
        .iter()
        .map(|e| TraceRow {
            iter: e.outer_iteration,
            inner_iters: e.inner_report.inner_iterations,
            cum_op_apps: e.cumulative_operator_applications,
            flop_proxy: e.cumulative_flop_proxy,
            sin_theta: e.sin_theta,
            tcc: None,
            pcc: None,
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let emit = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.iter,
                r.inner_iters,
                r.cum_op_apps,
                r.flop_proxy,
                cell(r.sin_theta),
                cell(r.tcc),
                cell(r.pcc)
            )?;
        }
        w.flush()
    };
    emit(&mut w).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))
}

pub struct Summary<'a> {
    pub mode: &'a str,
    pub k: usize,
    pub iters: usize,
    pub sin_theta: Option<f64>,
    pub correlations: Option<&'a [f64]>,
    pub op_apps: u64,
    pub flop_proxy: f64,
    pub wall_ms: u128,
}

pub fn write_summary(path: &Path, s: &Summary) -> Result<(), CliError> {
    let body = serde_json::json!({
        "mode": s.mode,
        "k": s.k,
        "iters": s.iters,
        "sin_theta": s.sin_theta,
        "correlations": s.correlations,
        "op_apps": s.op_apps,
        "flop_proxy": s.flop_proxy,
        "wall_ms": s.wall_ms,
    });
    let text = serde_json::to_string_pretty(&body)
        .map_err(|e| CliError::Run(format!("summary serialization: {e}")))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::Run(format!("{}: {e}", path.display())))
}
