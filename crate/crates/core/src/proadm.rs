//! Proximal ADMM on the augmented Lagrangian
//!
//! `L_μ = R(G, U) + (μ/2)(‖X − G×U‖² + ‖X_Ω − T_Ω‖²) + ⟨P^X, X − G×U⟩ + ⟨P^Ω, X_Ω − T_Ω⟩`
//!
//! with Gauss–Seidel block order core, factors, `X`, multipliers, and a
//! geometrically growing penalty `μ ← ρμ`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{SolverConfig, Termination, TraceEntry};
use crate::error::{Error, Result};
use crate::linalg::{soft_threshold, svd_shrink};
use crate::palm::INFLATION;
use crate::model::{clamp_in_place, grad_core, lipschitz_core, regularizer, FactorCoupling};
use crate::priors::{compute_omega, AdaptiveWeights, SmoothnessPrior};
use crate::solver::{
    ensure_finite, finish, observed_residual, prepare, random_core, random_factor, relative_step, Completion,
    Tracer,
};
use crate::tensor::{compose_completion, tucker_reconstruct, DenseTensor, Matrix, ObservationMask};

/// Abort when `|L_μ| / μ` exceeds this multiple of its initial magnitude.
/// Dividing by `μ` keeps the test blind to the geometric penalty schedule
/// itself.
pub const DIVERGENCE_FACTOR: f64 = 1e12;
/// Factors with a smaller Frobenius norm count as annihilated.
const COLLAPSE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ProadmState {
    pub g: DenseTensor,
    pub factors: Vec<Matrix>,
    pub x: DenseTensor,
    /// Multiplier of `X = G×U`.
    pub p_x: DenseTensor,
    /// Multiplier of `X_Ω = T_Ω`; zero outside Ω.
    pub p_omega: DenseTensor,
    pub mu: f64,
    pub rho: f64,
    pub iteration: usize,
    /// Blocks redrawn so far because a prox step annihilated them.
    pub reinitialized: usize,
    rng: ChaCha8Rng,
}

/// Fixed data of a ProADM run.
#[derive(Clone, Debug)]
pub struct ProadmInputs<'a> {
    pub t_obs: &'a DenseTensor,
    pub mask: &'a ObservationMask,
    pub prior: &'a SmoothnessPrior,
    pub alpha: f64,
    pub beta: &'a [f64],
    pub inflate_lipschitz: bool,
    pub clamp_bound: Option<f64>,
}

impl ProadmInputs<'_> {
    fn weights(&self, omega: &[f64]) -> AdaptiveWeights {
        AdaptiveWeights { alpha: self.alpha, lambda: 1.0, beta: self.beta.to_vec(), omega: omega.to_vec() }
    }

    fn inflation(&self) -> f64 {
        if self.inflate_lipschitz {
            INFLATION
        } else {
            1.0
        }
    }
}

impl ProadmState {
    pub fn initialize(x0: DenseTensor, mu0: f64, rho: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = x0.dims().to_vec();
        let factors: Vec<Matrix> = dims.iter().map(|&d| random_factor(d, &mut rng)).collect();
        let g = random_core(&dims, &mut rng)?;
        Ok(Self {
            g,
            factors,
            p_x: DenseTensor::zeros(&dims)?,
            p_omega: DenseTensor::zeros(&dims)?,
            x: x0,
            mu: mu0,
            rho,
            iteration: 0,
            reinitialized: 0,
            rng,
        })
    }

    /// `X + P^X/μ`, the point the Tucker model is fitted to.
    fn target(&self) -> Result<DenseTensor> {
        let mut target = self.x.clone();
        target.axpy(1.0 / self.mu, &self.p_x)?;
        Ok(target)
    }
}

/// Augmented Lagrangian at the current state.
pub fn lagrangian(
    state: &ProadmState,
    t_obs: &DenseTensor,
    mask: &ObservationMask,
    weights: &AdaptiveWeights,
    prior: &SmoothnessPrior,
) -> Result<f64> {
    let recon = tucker_reconstruct(&state.g, &state.factors)?;
    lagrangian_with_recon(state, &recon, t_obs, mask, weights, prior)
}

fn lagrangian_with_recon(
    state: &ProadmState,
    recon: &DenseTensor,
    t_obs: &DenseTensor,
    mask: &ObservationMask,
    weights: &AdaptiveWeights,
    prior: &SmoothnessPrior,
) -> Result<f64> {
    state.x.check_same_dims(recon)?;
    state.x.check_same_dims(t_obs)?;
    mask.check_dims(t_obs.dims())?;
    let mut total = regularizer(&state.g, &state.factors, weights, prior)?;
    let (mut fit, mut obs, mut cross_x, mut cross_o) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..state.x.len() {
        let r = state.x.data()[i] - recon.data()[i];
        fit += r * r;
        cross_x += state.p_x.data()[i] * r;
        if mask.is_observed(i) {
            let o = state.x.data()[i] - t_obs.data()[i];
            obs += o * o;
            cross_o += state.p_omega.data()[i] * o;
        }
    }
    total += 0.5 * state.mu * (fit + obs) + cross_x + cross_o;
    Ok(total)
}

/// Prox-linearized core step around the current core.
pub fn update_core_admm(
    state: &ProadmState,
    alpha: f64,
    inflation: f64,
    clamp_bound: Option<f64>,
) -> Result<DenseTensor> {
    let target = state.target()?;
    let lip = inflation * lipschitz_core(&state.factors, state.mu)?;
    if !(lip > 0.0) {
        return Ok(state.g.clone());
    }
    let mut moved = state.g.clone();
    moved.axpy(-1.0 / lip, &grad_core(&state.g, &state.factors, &target, state.mu)?)?;
    let mut g = soft_threshold(&moved, alpha / lip)?;
    if let Some(b) = clamp_bound {
        clamp_in_place(g.data_mut(), b);
    }
    Ok(g)
}

/// Prox-linearized step on factor `mode` around its current value, using
/// whatever core and factors `state` currently holds.
#[allow(clippy::too_many_arguments)]
pub fn update_factor_admm(
    state: &ProadmState,
    mode: usize,
    alpha: f64,
    omega: f64,
    beta: f64,
    prior: &SmoothnessPrior,
    inflation: f64,
    clamp_bound: Option<f64>,
) -> Result<Matrix> {
    let target = state.target()?;
    let coupling = FactorCoupling::new(&state.g, &state.factors, &target, mode)?;
    let lap = prior.laplacian(mode);
    let lip = inflation * coupling.lipschitz(state.mu, beta, prior.laplacian_norm(mode))?;
    let u = &state.factors[mode];
    if !(lip > 0.0) {
        return Ok(u.clone());
    }
    let mut moved = u.clone();
    moved.axpy(-1.0 / lip, &coupling.gradient(u, state.mu, beta, lap)?)?;
    let mut out = svd_shrink(&moved, (1.0 - alpha) * omega / lip)?;
    if let Some(b) = clamp_bound {
        clamp_in_place(out.data_mut(), b);
    }
    Ok(out)
}

/// Exact minimizer of the Lagrangian in `X` given the new core and factors:
/// observed entries average the model and the data, missing entries follow
/// the model.
pub fn update_x_admm(
    state: &ProadmState,
    recon: &DenseTensor,
    t_obs: &DenseTensor,
    mask: &ObservationMask,
) -> Result<DenseTensor> {
    recon.check_same_dims(t_obs)?;
    mask.check_dims(t_obs.dims())?;
    let inv_mu = 1.0 / state.mu;
    let mut x = recon.clone();
    for (i, v) in x.data_mut().iter_mut().enumerate() {
        let model = *v - state.p_x.data()[i] * inv_mu;
        *v = if mask.is_observed(i) {
            0.5 * (model + t_obs.data()[i] - state.p_omega.data()[i] * inv_mu)
        } else {
            model
        };
    }
    Ok(x)
}

/// Dual ascent on both multipliers, then `μ ← ρμ`.
pub fn update_multipliers(
    state: &mut ProadmState,
    recon: &DenseTensor,
    t_obs: &DenseTensor,
    mask: &ObservationMask,
) -> Result<()> {
    recon.check_same_dims(&state.x)?;
    t_obs.check_same_dims(&state.x)?;
    mask.check_dims(t_obs.dims())?;
    let mu = state.mu;
    for i in 0..state.x.len() {
        let x = state.x.data()[i];
        state.p_x.data_mut()[i] += mu * (x - recon.data()[i]);
        if mask.is_observed(i) {
            state.p_omega.data_mut()[i] += mu * (x - t_obs.data()[i]);
        }
    }
    state.mu *= state.rho;
    Ok(())
}

/// One full Gauss–Seidel sweep. Returns `G×U` of the updated blocks.
///
/// While `μ` is small the thresholds can zero out a whole block, after which
/// it would never recover; such a block is redrawn from the run's stream.
pub fn proadm_iterate(state: &mut ProadmState, inputs: &ProadmInputs<'_>) -> Result<DenseTensor> {
    let omega = compute_omega(&state.factors)?;
    let inflation = inputs.inflation();
    state.g = update_core_admm(state, inputs.alpha, inflation, inputs.clamp_bound)?;
    if state.g.max_abs() == 0.0 {
        state.g = random_core(state.g.dims(), &mut state.rng)?;
        if let Some(b) = inputs.clamp_bound {
            clamp_in_place(state.g.data_mut(), b);
        }
        state.reinitialized += 1;
    }
    for n in 0..state.factors.len() {
        let u = update_factor_admm(
            state,
            n,
            inputs.alpha,
            omega[n],
            inputs.beta[n],
            inputs.prior,
            inflation,
            inputs.clamp_bound,
        )?;
        state.factors[n] = if u.frobenius_norm() < COLLAPSE_FLOOR {
            state.reinitialized += 1;
            let mut fresh = random_factor(u.rows(), &mut state.rng);
            if let Some(b) = inputs.clamp_bound {
                clamp_in_place(fresh.data_mut(), b);
            }
            fresh
        } else {
            u
        };
    }
    let recon = tucker_reconstruct(&state.g, &state.factors)?;
    state.x = update_x_admm(state, &recon, inputs.t_obs, inputs.mask)?;
    update_multipliers(state, &recon, inputs.t_obs, inputs.mask)?;
    state.iteration += 1;
    Ok(recon)
}

/// ProADM completion run.
pub fn proadm_run(
    t_obs: &DenseTensor,
    mask: &ObservationMask,
    config: &SolverConfig,
    truth: Option<&DenseTensor>,
) -> Result<Completion> {
    let setup = prepare(t_obs, mask, config)?;
    let inputs = ProadmInputs {
        t_obs,
        mask,
        prior: &setup.prior,
        alpha: config.alpha,
        beta: &setup.beta,
        inflate_lipschitz: config.inflate_lipschitz,
        clamp_bound: setup.clamp_bound,
    };
    let mut state = ProadmState::initialize(setup.x0.clone(), config.mu0, config.rho, config.seed)?;
    let mut omega = compute_omega(&state.factors)?;
    let initial = lagrangian(&state, t_obs, mask, &inputs.weights(&omega), inputs.prior)?;
    ensure_finite(initial, 0, "initial Lagrangian")?;
    let limit = DIVERGENCE_FACTOR * (initial.abs() / state.mu).max(1.0);

    let mut tracer = Tracer::new(truth);
    let mut termination = Termination::MaxIters;
    for _ in 0..config.max_iters {
        let x_prev = state.x.clone();
        let recon = proadm_iterate(&mut state, &inputs)?;
        let k = state.iteration;
        if let Ok(w) = compute_omega(&state.factors) {
            omega = w;
        }
        let value = lagrangian_with_recon(&state, &recon, t_obs, mask, &inputs.weights(&omega), inputs.prior)?;
        ensure_finite(value, k, "augmented Lagrangian")?;
        let scaled = value.abs() / state.mu;
        if scaled > limit {
            return Err(Error::Divergence {
                iteration: k,
                reason: format!("augmented Lagrangian / mu = {scaled:e} exceeds {limit:e}"),
            });
        }
        let rel_change = observed_residual(&state.x, t_obs, mask, setup.t_obs_norm);
        let rse = tracer.rse_of(|| compose_completion(t_obs, mask, &state.x))?;
        tracer.push(TraceEntry {
            k,
            objective: value,
            rel_change,
            observed_residual: rel_change,
            successive_change: relative_step(&state.x, &x_prev),
            rse,
            restarted: false,
            elapsed_ms: None,
        });
        if rel_change < config.tol {
            termination = Termination::Tolerance;
            break;
        }
    }
    let estimate = compose_completion(t_obs, mask, &state.x)?;
    finish(config, t_obs, mask, &setup, omega, termination, tracer, estimate, state.g, state.factors)
}
