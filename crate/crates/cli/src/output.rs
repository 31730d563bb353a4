use std::path::Path;

use serde::Serialize;
use tuckercomp::io::{write_atomic, write_ppm, write_tensor};
use tuckercomp::{Completion, DenseTensor, RunReport, SolverConfig, Termination};

use crate::error::{CliError, CliResult};

/// Written in place of a run report when a run aborts.
#[derive(Debug, Serialize)]
pub struct FailureReport<'a> {
    pub config: &'a SolverConfig,
    pub dims: &'a [usize],
    /// `divergence` when the divergence guard or a non-finite value stopped the run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub termination: Option<Termination>,
    pub exit_code: u8,
    pub error: String,
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> CliResult<()> {
    write_atomic(path, &json_bytes(value)?).map_err(|e| CliError::at(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn trace_csv(report: &RunReport) -> CliResult<Vec<u8>> {
    let timing = report.trace.iter().any(|e| e.elapsed_ms.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["k", "objective", "rel_change", "successive_change", "observed_residual", "rse", "restarted"];
    if timing {
        header.push("elapsed_ms");
    }
    w.write_record(&header)?;
    for e in &report.trace {
        let mut row = vec![
            e.k.to_string(),
            e.objective.to_string(),
            e.rel_change.to_string(),
            e.successive_change.to_string(),
            e.observed_residual.to_string(),
            fmt_opt(e.rse),
            e.restarted.to_string(),
        ];
        if timing {
            row.push(fmt_opt(e.elapsed_ms));
        }
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| CliError::io(format!("csv: {e}")))
}

/// `out.dtf`, `report.json` and `trace.csv` (plus `out.ppm` for image
/// inputs) under `dir`.
pub fn write_run(dir: &Path, completion: &Completion, image: bool, timing: bool) -> CliResult<()> {
    create_dir(dir)?;
    let mut report = completion.report.clone();
    if !timing {
        report.strip_timing();
    }
    let out = dir.join("out.dtf");
    write_tensor(&completion.estimate, &out).map_err(|e| CliError::at(&out, e))?;
    if image {
        let ppm = dir.join("out.ppm");
        write_ppm(&completion.estimate, &ppm).map_err(|e| CliError::at(&ppm, e))?;
    }
    write_json(&report, &dir.join("report.json"))?;
    let trace = dir.join("trace.csv");
    write_atomic(&trace, &trace_csv(&report)?).map_err(|e| CliError::at(&trace, e))
}

pub fn write_failure(dir: &Path, config: &SolverConfig, data: &DenseTensor, err: &CliError) -> CliResult<()> {
    create_dir(dir)?;
    let termination = (err.code == crate::error::EXIT_DIVERGENCE).then_some(Termination::Divergence);
    let report = FailureReport { config, dims: data.dims(), termination, exit_code: err.code, error: err.message.clone() };
    write_json(&report, &dir.join("report.json"))
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))
}
