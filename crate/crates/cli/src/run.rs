use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use tuckercomp::io::{read_mask, read_ppm, read_tensor, write_atomic};
use tuckercomp::{complete, DenseTensor, ObservationMask, SolverConfig};

use crate::args::{CompleteArgs, RunArgs, SweepArgs, SWEEP_ALPHAS, SWEEP_LAMBDAS};
use crate::error::{CliError, CliResult, EXIT_DIVERGENCE};
use crate::output::{create_dir, write_failure, write_run};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "TUCKERCOMP_THREADS";

pub struct Inputs {
    pub t_obs: DenseTensor,
    pub mask: ObservationMask,
    pub truth: Option<DenseTensor>,
    pub image: bool,
}

fn is_ppm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm"))
}

pub fn read_data(path: &Path) -> CliResult<DenseTensor> {
    let t = if is_ppm(path) { read_ppm(path) } else { read_tensor(path) };
    t.map_err(|e| CliError::at(path, e))
}

pub fn read_mask_file(path: &Path) -> CliResult<ObservationMask> {
    read_mask(path).map_err(|e| CliError::at(path, e))
}

pub fn load(run: &RunArgs) -> CliResult<Inputs> {
    let t = read_data(&run.input)?;
    let mask = read_mask_file(&run.mask)?;
    if mask.dims() != t.dims() {
        return Err(CliError::config(format!("mask dims {:?} vs tensor dims {:?}", mask.dims(), t.dims())));
    }
    // Entries outside the mask are never read; zero them so they cannot leak.
    let t_obs = mask.project(&t)?;
    let truth = run.truth.as_deref().map(read_data).transpose()?;
    if let Some(truth) = &truth {
        if truth.dims() != t.dims() {
            return Err(CliError::config(format!("truth dims {:?} vs tensor dims {:?}", truth.dims(), t.dims())));
        }
    }
    Ok(Inputs { t_obs, mask, truth, image: is_ppm(&run.input) })
}

fn run_one(inputs: &Inputs, config: &SolverConfig, dir: &Path, timing: bool) -> CliResult<tuckercomp::Completion> {
    match complete(&inputs.t_obs, &inputs.mask, config, inputs.truth.as_ref()) {
        Ok(c) => {
            write_run(dir, &c, inputs.image, timing)?;
            Ok(c)
        }
        Err(e) => {
            let err = CliError::from(e);
            if err.code == EXIT_DIVERGENCE {
                write_failure(dir, config, &inputs.t_obs, &err)?;
            }
            Err(err)
        }
    }
}

pub fn cmd_complete(args: &CompleteArgs) -> CliResult<()> {
    let config = args.run.config(args.alpha, args.lambda)?;
    let inputs = load(&args.run)?;
    let c = run_one(&inputs, &config, &args.run.out, args.run.timing)?;
    let r = &c.report;
    eprintln!(
        "{}: {} iterations, {:?}, final change {:.3e}",
        r.config.solver,
        r.iterations,
        r.termination,
        r.trace.last().map_or(f64::NAN, |e| e.rel_change)
    );
    Ok(())
}

/// Outcome of one sweep cell.
struct Cell {
    alpha: f64,
    lambda: f64,
    result: Result<tuckercomp::Completion, CliError>,
}

pub fn cell_dir(out: &Path, alpha: f64, lambda: f64) -> PathBuf {
    out.join("cells").join(format!("alpha_{alpha}_lambda_{lambda}"))
}

/// Worker count: `--jobs`, capped by the thread environment variable.
pub fn worker_count(jobs: usize, cells: usize) -> CliResult<usize> {
    let cap = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))
        })?,
        Err(_) => usize::MAX,
    };
    Ok(jobs.max(1).min(cap).min(cells.max(1)))
}

fn sweep_csv(cells: &[Cell]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["alpha", "lambda", "status", "mpsnr", "mssim", "rse", "iterations", "termination", "error"])?;
    for cell in cells {
        let (a, l) = (cell.alpha.to_string(), cell.lambda.to_string());
        match &cell.result {
            Ok(c) => {
                let q = c.report.quality.as_ref();
                let f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
                let termination = serde_json::to_value(c.report.termination)?;
                w.write_record([
                    a,
                    l,
                    "ok".into(),
                    f(q.and_then(|q| q.mpsnr)),
                    f(q.and_then(|q| q.mssim)),
                    f(q.and_then(|q| q.rse)),
                    c.report.iterations.to_string(),
                    termination.as_str().unwrap_or_default().to_string(),
                    String::new(),
                ])?;
            }
            Err(e) => {
                let status = if e.code == EXIT_DIVERGENCE { "diverged" } else { "failed" };
                w.write_record([a, l, status.into(), "".into(), "".into(), "".into(), "".into(), "".into(), e.message.clone()])?;
            }
        }
    }
    w.into_inner().map_err(|e| CliError::io(format!("csv: {e}")))
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    let alphas = args.alphas.clone().unwrap_or_else(|| SWEEP_ALPHAS.to_vec());
    let lambdas = args.lambdas.clone().unwrap_or_else(|| SWEEP_LAMBDAS.to_vec());
    if alphas.is_empty() || lambdas.is_empty() {
        return Err(CliError::config("sweep grids must be non-empty"));
    }
    // Settings shared by every cell must be valid before any run starts.
    args.run.config(0.5, 1.0)?;
    let inputs = load(&args.run)?;
    let grid: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| lambdas.iter().map(move |&l| (a, l))).collect();
    let workers = worker_count(args.jobs, grid.len())?;
    create_dir(&args.run.out)?;

    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Cell>>> = grid.iter().map(|_| Mutex::new(None)).collect();
    let io_error: Mutex<Option<CliError>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(alpha, lambda)) = grid.get(i) else { break };
                let dir = cell_dir(&args.run.out, alpha, lambda);
                let result = args.run.config(alpha, lambda).and_then(|config| {
                    run_one(&inputs, &config, &dir, args.run.timing).map_err(|e| {
                        if e.code != EXIT_DIVERGENCE {
                            // Non-divergence failures still leave a record
                            let _ = write_failure(&dir, &config, &inputs.t_obs, &e);
                        }
                        e
                    })
                });
                if let Err(e) = &result {
                    if e.code == crate::error::EXIT_IO {
                        io_error.lock().unwrap().get_or_insert(CliError::io(e.message.clone()));
                    }
                }
                *slots[i].lock().unwrap() = Some(Cell { alpha, lambda, result });
            });
        }
    });

    let cells: Vec<Cell> = slots.into_iter().map(|m| m.into_inner().unwrap().expect("every cell runs")).collect();
    let csv_path = args.run.out.join("sweep.csv");
    write_atomic(&csv_path, &sweep_csv(&cells)?).map_err(|e| CliError::at(&csv_path, e))?;

    let failed: Vec<&CliError> = cells.iter().filter_map(|c| c.result.as_ref().err()).collect();
    eprintln!("sweep: {} cells, {} failed", cells.len(), failed.len());
    if let Some(e) = io_error.into_inner().unwrap() {
        return Err(e);
    }
    if failed.len() == cells.len() {
        let code = failed.iter().map(|e| e.code).max().unwrap_or(EXIT_DIVERGENCE);
        return Err(CliError { code, message: format!("all {} sweep cells failed", cells.len()) });
    }
    Ok(())
}
