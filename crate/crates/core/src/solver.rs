//! Set-up shared by both solvers and the top-level `complete` entry point.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{RunReport, SolverConfig, SolverKind, Termination, TraceEntry};
use crate::error::{Error, Result};
use crate::metrics::{rse, QualityReport};
use crate::priors::{compute_beta, SmoothnessPrior};
use crate::tensor::{compose_completion, frobenius_norm, DenseTensor, Matrix, ObservationMask};

/// Output of a completion run.
#[derive(Clone, Debug)]
pub struct Completion {
    /// `T_Ω + X̂_Ω̄`.
    pub estimate: DenseTensor,
    pub core: DenseTensor,
    pub factors: Vec<Matrix>,
    pub report: RunReport,
}

/// Random square factor: i.i.d. standard normal entries, unit-norm columns.
pub fn random_factor(size: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut u = Matrix::zeros(size, size);
    for j in 0..size {
        let col = u.col_mut(j);
        col.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            col.iter_mut().for_each(|v| *v /= norm);
        } else {
            col[0] = 1.0;
        }
    }
    u
}

/// Random core: i.i.d. normal entries scaled by 0.01.
pub fn random_core(dims: &[usize], rng: &mut ChaCha8Rng) -> Result<DenseTensor> {
    let mut g = DenseTensor::zeros(dims)?;
    g.data_mut().iter_mut().for_each(|v| *v = 0.01 * rng.sample::<f64, _>(StandardNormal));
    Ok(g)
}

/// Data-level quantities fixed for the whole run.
pub(crate) struct Setup {
    pub x0: DenseTensor,
    pub prior: SmoothnessPrior,
    pub beta: Vec<f64>,
    pub t_obs_norm: f64,
    pub clamp_bound: Option<f64>,
}

pub(crate) fn check_inputs(t_obs: &DenseTensor, mask: &ObservationMask, config: &SolverConfig) -> Result<()> {
    config.validate()?;
    if mask.dims() != t_obs.dims() {
        return Err(Error::Shape(format!("mask dims {:?} vs tensor dims {:?}", mask.dims(), t_obs.dims())));
    }
    if mask.count_observed() == 0 {
        return Err(Error::EmptyMask);
    }
    let observed_finite =
        t_obs.data().iter().zip(mask.observed()).filter(|(_, &o)| o).all(|(v, _)| v.is_finite());
    if !observed_finite {
        return Err(Error::NonFinite("observed entries"));
    }
    Ok(())
}

/// Observed entries kept, missing entries filled with the observed mean.
pub fn mean_fill(t_obs: &DenseTensor, mask: &ObservationMask) -> Result<DenseTensor> {
    let mean = mask.observed_mean(t_obs)?;
    let fill = DenseTensor::filled(t_obs.dims(), mean)?;
    compose_completion(t_obs, mask, &fill)
}

pub(crate) fn prepare(t_obs: &DenseTensor, mask: &ObservationMask, config: &SolverConfig) -> Result<Setup> {
    check_inputs(t_obs, mask, config)?;
    let x0 = mean_fill(t_obs, mask)?;
    let gamma = config.gamma_for(t_obs.order())?;
    let prior = SmoothnessPrior::from_tensor(&x0, &gamma, config.bandwidth)?;
    let beta = compute_beta(&x0, &prior)?;
    let t_obs_norm = mask.observed_norm(t_obs)?;
    let clamp_bound = config.clamp.map(|nu| {
        let inf_norm = t_obs.data().iter().zip(mask.observed()).filter(|(_, &o)| o).fold(0.0f64, |m, (v, _)| m.max(v.abs()));
        nu.max(inf_norm)
    });
    Ok(Setup { x0, prior, beta, t_obs_norm, clamp_bound })
}

/// `‖(a − t)_Ω‖ / ‖t_Ω‖`; absolute when `t_Ω` is zero.
pub(crate) fn observed_residual(
    a: &DenseTensor,
    t_obs: &DenseTensor,
    mask: &ObservationMask,
    t_obs_norm: f64,
) -> f64 {
    let num = a
        .data()
        .iter()
        .zip(t_obs.data())
        .zip(mask.observed())
        .filter(|(_, &o)| o)
        .map(|((x, t), _)| (x - t) * (x - t))
        .sum::<f64>()
        .sqrt();
    if t_obs_norm > 0.0 {
        num / t_obs_norm
    } else {
        num
    }
}

pub(crate) fn relative_step(new: &DenseTensor, old: &DenseTensor) -> f64 {
    let diff: f64 = new.data().iter().zip(old.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let base = frobenius_norm(old);
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}

/// Accumulates per-iteration trace rows.
pub(crate) struct Tracer<'a> {
    pub truth: Option<&'a DenseTensor>,
    pub start: Instant,
    pub trace: Vec<TraceEntry>,
}

impl<'a> Tracer<'a> {
    pub fn new(truth: Option<&'a DenseTensor>) -> Self {
        Self { truth, start: Instant::now(), trace: Vec::new() }
    }

    pub fn rse_of(&self, estimate: impl FnOnce() -> Result<DenseTensor>) -> Result<Option<f64>> {
        match self.truth {
            Some(truth) => Ok(Some(rse(&estimate()?, truth)?)),
            None => Ok(None),
        }
    }

    pub fn push(&mut self, mut entry: TraceEntry) {
        entry.elapsed_ms = Some(self.start.elapsed().as_secs_f64() * 1e3);
        self.trace.push(entry);
    }
}

pub(crate) fn ensure_finite(value: f64, iteration: usize, what: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence { iteration, reason: format!("{what} is not finite ({value})") })
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish(
    config: &SolverConfig,
    t_obs: &DenseTensor,
    mask: &ObservationMask,
    setup: &Setup,
    omega: Vec<f64>,
    termination: Termination,
    tracer: Tracer<'_>,
    estimate: DenseTensor,
    core: DenseTensor,
    factors: Vec<Matrix>,
) -> Result<Completion> {
    let quality = match tracer.truth {
        Some(truth) => Some(QualityReport::evaluate(&estimate, truth, mask)?),
        None => None,
    };
    let report = RunReport {
        config: config.clone(),
        dims: t_obs.dims().to_vec(),
        observed: mask.count_observed(),
        gamma: setup.prior.gamma().to_vec(),
        bandwidths: setup.prior.bandwidths().to_vec(),
        beta: setup.beta.clone(),
        omega,
        iterations: tracer.trace.len(),
        termination,
        trace: tracer.trace,
        quality,
    };
    Ok(Completion { estimate, core, factors, report })
}

/// Runs the configured solver. `truth`, when given, adds an RSE column to
/// the trace and a final quality report.
pub fn complete(
    t_obs: &DenseTensor,
    mask: &ObservationMask,
    config: &SolverConfig,
    truth: Option<&DenseTensor>,
) -> Result<Completion> {
    if let Some(truth) = truth {
        if truth.dims() != t_obs.dims() {
            return Err(Error::Shape(format!("truth dims {:?} vs tensor dims {:?}", truth.dims(), t_obs.dims())));
        }
    }
    match config.solver {
        SolverKind::Palm => crate::palm::palm_run(t_obs, mask, config, truth),
        SolverKind::Proadm => crate::proadm::proadm_run(t_obs, mask, config, truth),
    }
}
