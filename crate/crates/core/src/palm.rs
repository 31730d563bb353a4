//! Proximal alternating linearized minimization with extrapolation.
//!
//! Each iteration takes one proximal-linearized step per block in the order
//! core, `U_1..U_N`, then projects `X` onto the observations. Steps start
//! from extrapolated points; when the extrapolated step would raise the
//! objective, the iteration is redone from the current iterate and the next
//! extrapolation is dropped, so the recorded objective never increases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{SolverConfig, Termination, TraceEntry};
use crate::error::{Error, Result};
use crate::linalg::{soft_threshold, svd_shrink};
use crate::model::{clamp_in_place, grad_core, lipschitz_core, regularizer, FactorCoupling};
use crate::priors::{compute_omega, AdaptiveWeights, SmoothnessPrior};
use crate::solver::{
    ensure_finite, finish, observed_residual, prepare, random_core, random_factor, relative_step, Completion,
    Tracer,
};
use crate::tensor::{compose_completion, tucker_reconstruct, DenseTensor, Matrix, ObservationMask};

/// Lipschitz constants below this are treated as a collapsed block.
const LIPSCHITZ_FLOOR: f64 = 1e-12;
pub const INFLATION: f64 = 1.1;

/// `Φ = Σ(1−α)ω_n‖U_n‖_* + α‖G‖_1 + Σ_{n∈Γ}(β_n/2)tr(U_nᵀL_nU_n) + (λ/2)‖G×U − X‖²`.
pub fn objective(
    g: &DenseTensor,
    factors: &[Matrix],
    x: &DenseTensor,
    weights: &AdaptiveWeights,
    prior: &SmoothnessPrior,
) -> Result<f64> {
    let recon = tucker_reconstruct(g, factors)?;
    objective_with_recon(g, factors, &recon, x, weights, prior)
}

fn objective_with_recon(
    g: &DenseTensor,
    factors: &[Matrix],
    recon: &DenseTensor,
    x: &DenseTensor,
    weights: &AdaptiveWeights,
    prior: &SmoothnessPrior,
) -> Result<f64> {
    let misfit = recon.sub(x)?;
    let fit: f64 = misfit.data().iter().map(|v| v * v).sum();
    Ok(regularizer(g, factors, weights, prior)? + 0.5 * weights.lambda * fit)
}

/// `t^k = (0.8 + sqrt(4 (t^{k−1})² + 0.8)) / 2`.
pub fn next_t(t_prev: f64) -> f64 {
    (0.8 + (4.0 * t_prev * t_prev + 0.8).sqrt()) / 2.0
}

/// `min{(t^{k−1} − 1)/t^k, 0.999 sqrt(L^{k−1}/L^k)}`.
pub fn momentum_weight(t_prev: f64, t_curr: f64, lip_prev: f64, lip_curr: f64) -> Result<f64> {
    if !(lip_prev > 0.0) || !(lip_curr > 0.0) {
        return Err(Error::Config(format!(
            "Lipschitz constants must be positive, got {lip_prev} and {lip_curr}"
        )));
    }
    Ok(((t_prev - 1.0) / t_curr).min(0.999 * (lip_prev / lip_curr).sqrt()))
}

/// Points that can be extrapolated: `curr + w (curr − prev)`.
pub trait Extrapolate: Sized {
    fn extrapolate(&self, prev: &Self, weight: f64) -> Result<Self>;
}

impl Extrapolate for DenseTensor {
    fn extrapolate(&self, prev: &Self, weight: f64) -> Result<Self> {
        let mut out = self.scaled(1.0 + weight);
        out.axpy(-weight, prev)?;
        Ok(out)
    }
}

impl Extrapolate for Matrix {
    fn extrapolate(&self, prev: &Self, weight: f64) -> Result<Self> {
        let mut out = self.scaled(1.0 + weight);
        out.axpy(-weight, prev)?;
        Ok(out)
    }
}

/// Returns the extrapolated point, the new `t^k`, and the weight applied.
pub fn extrapolation_step<T: Extrapolate>(
    t_prev: f64,
    lip_prev: f64,
    lip_curr: f64,
    curr: &T,
    prev: &T,
) -> Result<(T, f64, f64)> {
    if !(t_prev >= 1.0) {
        return Err(Error::Config(format!("t must be at least 1, got {t_prev}")));
    }
    let t = next_t(t_prev);
    let w = momentum_weight(t_prev, t, lip_prev, lip_curr)?;
    Ok((curr.extrapolate(prev, w)?, t, w))
}

/// Fixed data of a PALM run.
#[derive(Clone, Debug)]
pub struct PalmInputs<'a> {
    pub t_obs: &'a DenseTensor,
    pub mask: &'a ObservationMask,
    pub prior: &'a SmoothnessPrior,
    pub alpha: f64,
    pub lambda: f64,
    pub beta: &'a [f64],
    pub inflate_lipschitz: bool,
    pub clamp_bound: Option<f64>,
}

impl PalmInputs<'_> {
    fn weights(&self, omega: &[f64]) -> AdaptiveWeights {
        AdaptiveWeights { alpha: self.alpha, lambda: self.lambda, beta: self.beta.to_vec(), omega: omega.to_vec() }
    }

    fn step_lipschitz(&self, lip: f64) -> f64 {
        if self.inflate_lipschitz {
            INFLATION * lip
        } else {
            lip
        }
    }
}

#[derive(Clone, Debug)]
pub struct PalmState {
    pub g: DenseTensor,
    pub g_prev: DenseTensor,
    pub g_extrap: DenseTensor,
    pub factors: Vec<Matrix>,
    pub factors_prev: Vec<Matrix>,
    pub factors_extrap: Vec<Matrix>,
    /// `T_Ω + (G×U)_Ω̄`.
    pub x: DenseTensor,
    /// `G×U` for the current iterate.
    pub recon: DenseTensor,
    pub t: f64,
    pub lip_g: f64,
    pub lip_u: Vec<f64>,
    /// Nuclear-norm weights in force for the next iteration.
    pub omega: Vec<f64>,
    /// Objective of the current iterate under `omega`.
    pub phi: f64,
    pub phi_history: Vec<f64>,
    pub iteration: usize,
    rng: ChaCha8Rng,
}

/// What happened in one `palm_iterate` call.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub restarted: bool,
    pub reinitialized: bool,
    pub omega_refreshed: bool,
    /// `‖(G×U − T)_Ω‖ / ‖T_Ω‖`.
    pub observed_residual: f64,
    /// `‖X^{k+1} − X^k‖ / ‖X^k‖`, the stopping quantity.
    pub successive_change: f64,
    /// `Σ‖Θ^{k+1} − Θ^k‖²` over core and factors.
    pub displacement: f64,
}

struct Candidate {
    g: DenseTensor,
    factors: Vec<Matrix>,
    recon: DenseTensor,
    x: DenseTensor,
    phi: f64,
    lip_g: f64,
    lip_u: Vec<f64>,
}

enum StepError {
    Collapsed,
    Fatal(Error),
}

impl From<Error> for StepError {
    fn from(e: Error) -> Self {
        StepError::Fatal(e)
    }
}

impl PalmState {
    /// Random normalized factors, small random core, `x0` as the first `X`.
    pub fn initialize(x0: DenseTensor, inputs: &PalmInputs<'_>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = x0.dims().to_vec();
        let factors: Vec<Matrix> = dims.iter().map(|&d| random_factor(d, &mut rng)).collect();
        let g = random_core(&dims, &mut rng)?;
        Self::from_parts(g, factors, x0, inputs, rng)
    }

    /// Starts from explicit blocks.
    pub fn from_blocks(
        g: DenseTensor,
        factors: Vec<Matrix>,
        x: DenseTensor,
        inputs: &PalmInputs<'_>,
        seed: u64,
    ) -> Result<Self> {
        Self::from_parts(g, factors, x, inputs, ChaCha8Rng::seed_from_u64(seed))
    }

    fn from_parts(
        g: DenseTensor,
        factors: Vec<Matrix>,
        x: DenseTensor,
        inputs: &PalmInputs<'_>,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let omega = compute_omega(&factors)?;
        let recon = tucker_reconstruct(&g, &factors)?;
        let phi = objective_with_recon(&g, &factors, &recon, &x, &inputs.weights(&omega), inputs.prior)?;
        ensure_finite(phi, 0, "initial objective")?;
        let lip_g = lipschitz_core(&factors, inputs.lambda)?.max(LIPSCHITZ_FLOOR);
        let mut lip_u = Vec::with_capacity(factors.len());
        for n in 0..factors.len() {
            let c = FactorCoupling::new(&g, &factors, &x, n)?;
            lip_u.push(c.lipschitz(inputs.lambda, inputs.beta[n], inputs.prior.laplacian_norm(n))?.max(LIPSCHITZ_FLOOR));
        }
        Ok(Self {
            g_prev: g.clone(),
            g_extrap: g.clone(),
            factors_prev: factors.clone(),
            factors_extrap: factors.clone(),
            g,
            factors,
            x,
            recon,
            t: 1.0,
            lip_g,
            lip_u,
            omega,
            phi,
            phi_history: vec![phi],
            iteration: 0,
            rng,
        })
    }

    /// One proximal-linearized pass starting from `(from_g, from_factors)`.
    fn prox_pass(
        &self,
        from_g: &DenseTensor,
        from_factors: &[Matrix],
        inputs: &PalmInputs<'_>,
    ) -> std::result::Result<Candidate, StepError> {
        let lip_g = lipschitz_core(&self.factors, inputs.lambda)?;
        if lip_g < LIPSCHITZ_FLOOR {
            return Err(StepError::Collapsed);
        }
        let step_g = inputs.step_lipschitz(lip_g);
        let mut moved = from_g.clone();
        moved.axpy(-1.0 / step_g, &grad_core(from_g, &self.factors, &self.x, inputs.lambda)?)?;
        let mut g = soft_threshold(&moved, inputs.alpha / step_g)?;
        if let Some(b) = inputs.clamp_bound {
            clamp_in_place(g.data_mut(), b);
        }

        let mut factors = self.factors.clone();
        let mut lip_u = Vec::with_capacity(factors.len());
        for n in 0..factors.len() {
            let coupling = FactorCoupling::new(&g, &factors, &self.x, n)?;
            let lap = inputs.prior.laplacian(n);
            let lip = coupling.lipschitz(inputs.lambda, inputs.beta[n], inputs.prior.laplacian_norm(n))?;
            if lip < LIPSCHITZ_FLOOR {
                return Err(StepError::Collapsed);
            }
            let step = inputs.step_lipschitz(lip);
            let mut moved = from_factors[n].clone();
            moved.axpy(-1.0 / step, &coupling.gradient(&from_factors[n], inputs.lambda, inputs.beta[n], lap)?)?;
            let mut u = svd_shrink(&moved, (1.0 - inputs.alpha) * self.omega[n] / step)?;
            if let Some(b) = inputs.clamp_bound {
                clamp_in_place(u.data_mut(), b);
            }
            factors[n] = u;
            lip_u.push(lip);
        }

        let recon = tucker_reconstruct(&g, &factors)?;
        let x = compose_completion(inputs.t_obs, inputs.mask, &recon)?;
        let phi = objective_with_recon(&g, &factors, &recon, &x, &inputs.weights(&self.omega), inputs.prior)?;
        Ok(Candidate { g, factors, recon, x, phi, lip_g, lip_u })
    }

    /// Re-draws collapsed blocks from the run's random stream.
    fn reinitialize_collapsed(&mut self, inputs: &PalmInputs<'_>) -> Result<()> {
        let mut any = false;
        for u in self.factors.iter_mut() {
            if u.frobenius_norm() < LIPSCHITZ_FLOOR {
                *u = random_factor(u.rows(), &mut self.rng);
                any = true;
            }
        }
        if !any {
            self.g = random_core(self.g.dims(), &mut self.rng)?;
        }
        if let Some(b) = inputs.clamp_bound {
            clamp_in_place(self.g.data_mut(), b);
            self.factors.iter_mut().for_each(|u| clamp_in_place(u.data_mut(), b));
        }
        self.g_prev = self.g.clone();
        self.g_extrap = self.g.clone();
        self.factors_prev = self.factors.clone();
        self.factors_extrap = self.factors.clone();
        if let Ok(omega) = compute_omega(&self.factors) {
            self.omega = omega;
        }
        self.recon = tucker_reconstruct(&self.g, &self.factors)?;
        self.x = compose_completion(inputs.t_obs, inputs.mask, &self.recon)?;
        self.phi = objective_with_recon(&self.g, &self.factors, &self.recon, &self.x, &inputs.weights(&self.omega), inputs.prior)?;
        Ok(())
    }
}

fn displacement(a: &Candidate, s: &PalmState) -> f64 {
    let mut total: f64 = a.g.data().iter().zip(s.g.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    for (u, v) in a.factors.iter().zip(&s.factors) {
        total += u.data().iter().zip(v.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    }
    total
}

/// Advances `state` by one iteration.
pub fn palm_iterate(state: &mut PalmState, inputs: &PalmInputs<'_>) -> Result<StepOutcome> {
    let k = state.iteration + 1;
    let (g_start, u_start) = (state.g_extrap.clone(), state.factors_extrap.clone());
    let first = match state.prox_pass(&g_start, &u_start, inputs) {
        Ok(c) => c,
        Err(StepError::Collapsed) => {
            let x_prev = state.x.clone();
            state.reinitialize_collapsed(inputs)?;
            state.iteration = k;
            state.phi_history.push(state.phi);
            let t_obs_norm = inputs.mask.observed_norm(inputs.t_obs)?;
            return Ok(StepOutcome {
                restarted: false,
                reinitialized: true,
                omega_refreshed: true,
                observed_residual: observed_residual(&state.recon, inputs.t_obs, inputs.mask, t_obs_norm),
                successive_change: relative_step(&state.x, &x_prev),
                displacement: f64::NAN,
            });
        }
        Err(StepError::Fatal(e)) => return Err(e),
    };
    ensure_finite(first.phi, k, "objective")?;

    let mut restarted = false;
    let candidate = if first.phi > state.phi {
        restarted = true;
        let (g0, u0) = (state.g.clone(), state.factors.clone());
        match state.prox_pass(&g0, &u0, inputs) {
            Ok(c) => c,
            Err(StepError::Collapsed) => first,
            Err(StepError::Fatal(e)) => return Err(e),
        }
    } else {
        first
    };
    ensure_finite(candidate.phi, k, "objective")?;

    let disp = displacement(&candidate, state);
    let successive_change = relative_step(&candidate.x, &state.x);
    let model_residual =
        observed_residual(&candidate.recon, inputs.t_obs, inputs.mask, inputs.mask.observed_norm(inputs.t_obs)?);

    // Refresh ω from the new factors unless that would lift Φ above the
    // previous iterate's value.
    let mut phi = candidate.phi;
    let mut omega_refreshed = false;
    if let Ok(omega) = compute_omega(&candidate.factors) {
        let refreshed = objective_with_recon(
            &candidate.g,
            &candidate.factors,
            &candidate.recon,
            &candidate.x,
            &inputs.weights(&omega),
            inputs.prior,
        )?;
        if refreshed.is_finite() && refreshed <= state.phi {
            state.omega = omega;
            phi = refreshed;
            omega_refreshed = true;
        }
    }

    let Candidate { g, factors, recon, x, lip_g, lip_u, .. } = candidate;
    state.g_prev = std::mem::replace(&mut state.g, g);
    state.factors_prev = std::mem::replace(&mut state.factors, factors);
    state.recon = recon;
    state.x = x;

    let t_prev = state.t;
    let (lip_g_prev, lip_u_prev) = (state.lip_g, std::mem::replace(&mut state.lip_u, lip_u));
    state.lip_g = lip_g;
    if restarted {
        state.t = next_t(t_prev);
        state.g_extrap = state.g.clone();
        state.factors_extrap = state.factors.clone();
    } else {
        let (g_extrap, t, _) = extrapolation_step(t_prev, lip_g_prev, state.lip_g, &state.g, &state.g_prev)?;
        state.g_extrap = g_extrap;
        state.factors_extrap = state
            .factors
            .iter()
            .zip(&state.factors_prev)
            .zip(lip_u_prev.iter().zip(&state.lip_u))
            .map(|((u, u_prev), (&lp, &lc))| extrapolation_step(t_prev, lp, lc, u, u_prev).map(|r| r.0))
            .collect::<Result<Vec<_>>>()?;
        state.t = t;
    }

    state.phi = phi;
    state.phi_history.push(phi);
    state.iteration = k;
    Ok(StepOutcome {
        restarted,
        reinitialized: false,
        omega_refreshed,
        observed_residual: model_residual,
        successive_change,
        displacement: disp,
    })
}

/// PALM completion run.
pub fn palm_run(
    t_obs: &DenseTensor,
    mask: &ObservationMask,
    config: &SolverConfig,
    truth: Option<&DenseTensor>,
) -> Result<Completion> {
    let setup = prepare(t_obs, mask, config)?;
    let inputs = PalmInputs {
        t_obs,
        mask,
        prior: &setup.prior,
        alpha: config.alpha,
        lambda: config.lambda,
        beta: &setup.beta,
        inflate_lipschitz: config.inflate_lipschitz,
        clamp_bound: setup.clamp_bound,
    };
    let mut state = PalmState::initialize(setup.x0.clone(), &inputs, config.seed)?;
    let mut tracer = Tracer::new(truth);
    let mut termination = Termination::MaxIters;
    for _ in 0..config.max_iters {
        let outcome = palm_iterate(&mut state, &inputs)?;
        let rse = tracer.rse_of(|| Ok(state.x.clone()))?;
        tracer.push(TraceEntry {
            k: state.iteration,
            objective: state.phi,
            rel_change: outcome.successive_change,
            successive_change: outcome.successive_change,
            observed_residual: outcome.observed_residual,
            rse,
            restarted: outcome.restarted,
            elapsed_ms: None,
        });
        if outcome.successive_change < config.tol {
            termination = Termination::Tolerance;
            break;
        }
    }
    let estimate = state.x.clone();
    let omega = state.omega.clone();
    finish(config, t_obs, mask, &setup, omega, termination, tracer, estimate, state.g, state.factors)
}
