//! Terms of the low-rank Tucker representation objective and the
//! gradients/Lipschitz constants of its smooth coupling term
//! `(scale/2)‖G ×_n U_n − target‖²`.
//!
//! Both solvers share these: PALM uses `scale = λ` with the current `X`
//! as target, ProADM uses `scale = μ` with `X + P^X/μ`.

use crate::error::{Error, Result};
use crate::linalg::{nuclear_norm, spectral_norm};
use crate::priors::{smoothness_energy, AdaptiveWeights, SmoothnessPrior};
use crate::tensor::{core_times_all_but, multi_mode_product, unfold, DenseTensor, Matrix};

/// `(1−α)Σ ω_n‖U_n‖_* + α‖G‖_1 + Σ_{n∈Γ} (β_n/2) tr(U_nᵀ L_n U_n)`.
pub fn regularizer(
    g: &DenseTensor,
    factors: &[Matrix],
    weights: &AdaptiveWeights,
    prior: &SmoothnessPrior,
) -> Result<f64> {
    if factors.len() != g.order() || prior.order() != g.order() {
        return Err(Error::Shape("factor / prior count does not match core order".into()));
    }
    weights.check(g.order())?;
    let mut total = weights.alpha * g.l1_norm();
    for (n, u) in factors.iter().enumerate() {
        total += (1.0 - weights.alpha) * weights.omega[n] * nuclear_norm(u)?;
        if let Some(lap) = prior.laplacian(n) {
            total += weights.beta[n] * smoothness_energy(u, lap)?;
        }
    }
    Ok(total)
}

/// `scale · (G ×_n U_nᵀU_n − target ×_n U_nᵀ)`.
pub fn grad_core(g: &DenseTensor, factors: &[Matrix], target: &DenseTensor, scale: f64) -> Result<DenseTensor> {
    let grams = factors.iter().map(|u| u.t_matmul(u)).collect::<Result<Vec<_>>>()?;
    let transposed: Vec<Matrix> = factors.iter().map(Matrix::transpose).collect();
    let mut grad = multi_mode_product(g, &grams.iter().map(Some).collect::<Vec<_>>())?;
    let projected = multi_mode_product(target, &transposed.iter().map(Some).collect::<Vec<_>>())?;
    grad.axpy(-1.0, &projected)?;
    Ok(grad.scaled(scale))
}

/// `scale · ∏_n ‖U_nᵀU_n‖₂`.
pub fn lipschitz_core(factors: &[Matrix], scale: f64) -> Result<f64> {
    let mut lip = scale;
    for u in factors {
        // ‖UᵀU‖₂ = ‖U‖₂²
        lip *= spectral_norm(u)?.powi(2);
    }
    Ok(lip)
}

/// The quadratic model of the coupling term in one factor `U_n`, with the
/// core and all other factors held fixed. Stores `G_V G_Vᵀ` and
/// `target_(n) G_Vᵀ` for `G_V = G_(n) V_nᵀ`.
#[derive(Clone, Debug)]
pub struct FactorCoupling {
    pub mode: usize,
    pub gram: Matrix,
    pub cross: Matrix,
}

impl FactorCoupling {
    pub fn new(g: &DenseTensor, factors: &[Matrix], target: &DenseTensor, mode: usize) -> Result<Self> {
        let gv = core_times_all_but(g, factors, mode)?;
        let target_n = unfold(target, mode)?;
        if target_n.cols() != gv.cols() {
            return Err(Error::Shape(format!(
                "target unfolding has {} columns, core product has {}",
                target_n.cols(),
                gv.cols()
            )));
        }
        Ok(Self { mode, gram: gv.matmul_t(&gv)?, cross: target_n.matmul_t(&gv)? })
    }

    /// `scale (U G_V G_Vᵀ − target_(n) G_Vᵀ) + β L U`.
    pub fn gradient(&self, u: &Matrix, scale: f64, beta: f64, lap: Option<&Matrix>) -> Result<Matrix> {
        let mut grad = u.matmul(&self.gram)?;
        grad.axpy(-1.0, &self.cross)?;
        let mut grad = grad.scaled(scale);
        if let Some(lap) = lap {
            if beta != 0.0 {
                grad.axpy(beta, &lap.matmul(u)?)?;
            }
        }
        Ok(grad)
    }

    /// `scale ‖G_V G_Vᵀ‖₂ + β ‖L‖₂`.
    pub fn lipschitz(&self, scale: f64, beta: f64, lap_norm: f64) -> Result<f64> {
        Ok(scale * spectral_norm(&self.gram)? + beta * lap_norm)
    }
}

/// Gradient of `(scale/2)‖G×U − target‖² + Σ (β_n/2) tr(U_nᵀL_nU_n)` with
/// respect to `U_mode`, evaluated at `u` in place of `factors[mode]`.
#[allow(clippy::too_many_arguments)]
pub fn grad_factor(
    u: &Matrix,
    mode: usize,
    g: &DenseTensor,
    factors: &[Matrix],
    target: &DenseTensor,
    scale: f64,
    beta: f64,
    lap: Option<&Matrix>,
) -> Result<Matrix> {
    FactorCoupling::new(g, factors, target, mode)?.gradient(u, scale, beta, lap)
}

/// Lipschitz constant of [`grad_factor`] in `U_mode`.
pub fn lipschitz_factor(
    mode: usize,
    g: &DenseTensor,
    factors: &[Matrix],
    scale: f64,
    beta: f64,
    lap_norm: f64,
) -> Result<f64> {
    let gv = core_times_all_but(g, factors, mode)?;
    Ok(scale * spectral_norm(&gv.matmul_t(&gv)?)? + beta * lap_norm)
}

/// Clips every entry into `[-bound, bound]`.
pub(crate) fn clamp_in_place(values: &mut [f64], bound: f64) {
    values.iter_mut().for_each(|v| *v = v.clamp(-bound, bound));
}
