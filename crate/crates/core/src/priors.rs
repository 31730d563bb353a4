//! Laplacian smoothness priors on factor matrices and the self-adaptive
//! weights `β_n` (smoothness) and `ω_n` (nuclear norm).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{nuclear_norm, spectral_norm};
use crate::tensor::{unfold, DenseTensor, Matrix};

/// How the Gaussian kernel scale of a Laplacian is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Bandwidth {
    /// The unit scale, unless some row's weights to every other row
    /// underflow to zero under it; then the median scale.
    Auto,
    /// Median of the pairwise squared row distances of each unfolding.
    Median,
    /// A fixed scale; `Fixed(1.0)` is the unscaled kernel `exp(-‖x_i − x_j‖²)`.
    Fixed(f64),
}

impl Default for Bandwidth {
    fn default() -> Self {
        Bandwidth::Auto
    }
}

/// Whether `exp(-d/h)` leaves some row without a single non-zero
/// off-diagonal weight.
fn kernel_isolates_a_row(dist: &Matrix, h: f64) -> bool {
    let n = dist.rows();
    n > 1 && (0..n).any(|i| (0..n).filter(|&j| j != i).all(|j| (-dist.get(i, j) / h).exp() == 0.0))
}

/// Resolves `bandwidth` for one mode's pairwise squared distances.
pub fn resolve_bandwidth(dist: &Matrix, bandwidth: Bandwidth) -> Result<f64> {
    match bandwidth {
        Bandwidth::Auto if !kernel_isolates_a_row(dist, 1.0) => Ok(1.0),
        Bandwidth::Auto | Bandwidth::Median => Ok(median_of_offdiag(dist)),
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => Ok(h),
        Bandwidth::Fixed(h) => Err(Error::Config(format!("bandwidth must be positive, got {h}"))),
    }
}

pub fn pairwise_sq_distances(rows: &Matrix) -> Result<Matrix> {
    let n = rows.rows();
    let mut d = Matrix::zeros(n, n);
    for j in 0..n {
        for i in j + 1..n {
            let mut acc = 0.0;
            for c in 0..rows.cols() {
                let diff = rows.get(i, c) - rows.get(j, c);
                acc += diff * diff;
            }
            if !acc.is_finite() {
                return Err(Error::NonFinite("pairwise distances"));
            }
            d.set(i, j, acc);
            d.set(j, i, acc);
        }
    }
    Ok(d)
}

/// Median of the off-diagonal squared distances between rows of the
/// mode-`mode` unfolding. Falls back to the mean of the positive distances
/// and then to 1 when the median is zero.
pub fn median_bandwidth(x: &DenseTensor, mode: usize) -> Result<f64> {
    let dist = pairwise_sq_distances(&unfold(x, mode)?)?;
    Ok(median_of_offdiag(&dist))
}

fn median_of_offdiag(dist: &Matrix) -> f64 {
    let n = dist.rows();
    let mut vals: Vec<f64> = (0..n).flat_map(|j| (j + 1..n).map(move |i| (i, j))).map(|(i, j)| dist.get(i, j)).collect();
    if vals.is_empty() {
        return 1.0;
    }
    vals.sort_by(f64::total_cmp);
    let mid = vals.len() / 2;
    let median = if vals.len() % 2 == 0 { 0.5 * (vals[mid - 1] + vals[mid]) } else { vals[mid] };
    if median > 0.0 {
        return median;
    }
    let positive: Vec<f64> = vals.into_iter().filter(|&v| v > 0.0).collect();
    if positive.is_empty() {
        1.0
    } else {
        positive.iter().sum::<f64>() / positive.len() as f64
    }
}

fn laplacian_from_distances(dist: &Matrix, bandwidth: f64) -> Matrix {
    let n = dist.rows();
    let mut lap = Matrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            if i != j {
                lap.set(i, j, -(-dist.get(i, j) / bandwidth).exp());
            }
        }
    }
    for i in 0..n {
        // W_ii = 1 cancels between D and W, leaving the off-diagonal row sum
        let deg: f64 = (0..n).filter(|&j| j != i).map(|j| -lap.get(i, j)).sum();
        lap.set(i, i, deg);
    }
    lap
}

/// `L = D − W` with `W_ij = exp(−‖x_i − x_j‖² / bandwidth)` over the rows
/// `x_i` of the mode-`mode` unfolding of `x`.
pub fn build_laplacian(x: &DenseTensor, mode: usize, bandwidth: f64) -> Result<Matrix> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::Config(format!("bandwidth must be positive, got {bandwidth}")));
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("laplacian source tensor"));
    }
    let dist = pairwise_sq_distances(&unfold(x, mode)?)?;
    Ok(laplacian_from_distances(&dist, bandwidth))
}

/// `½ tr(Uᵀ L U)`.
pub fn smoothness_energy(u: &Matrix, lap: &Matrix) -> Result<f64> {
    let lu = lap.matmul(u)?;
    Ok(0.5 * u.data().iter().zip(lu.data()).map(|(a, b)| a * b).sum::<f64>())
}

/// Per-mode Laplacians for the smooth-mode set Γ.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothnessPrior {
    /// `laplacians[n]` is `Some` exactly when `n ∈ Γ`.
    laplacians: Vec<Option<Matrix>>,
    /// Spectral norms of the Laplacians, cached for step sizes.
    norms: Vec<f64>,
    gamma: Vec<usize>,
    bandwidths: Vec<f64>,
}

impl SmoothnessPrior {
    /// No smoothness on any mode.
    pub fn none(order: usize) -> Self {
        Self { laplacians: vec![None; order], norms: vec![0.0; order], gamma: Vec::new(), bandwidths: Vec::new() }
    }

    pub fn from_tensor(x: &DenseTensor, gamma: &[usize], bandwidth: Bandwidth) -> Result<Self> {
        let order = x.order();
        let mut gamma = gamma.to_vec();
        gamma.sort_unstable();
        gamma.dedup();
        if let Some(&bad) = gamma.iter().find(|&&n| n >= order) {
            return Err(Error::ModeOutOfRange { mode: bad, order });
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("laplacian source tensor"));
        }
        let mut prior = Self::none(order);
        for &n in &gamma {
            let dist = pairwise_sq_distances(&unfold(x, n)?)?;
            let h = resolve_bandwidth(&dist, bandwidth)?;
            let lap = laplacian_from_distances(&dist, h);
            prior.norms[n] = spectral_norm(&lap)?;
            prior.laplacians[n] = Some(lap);
            prior.bandwidths.push(h);
        }
        prior.gamma = gamma;
        Ok(prior)
    }

    /// Builds a prior from explicit Laplacians; `None` entries are outside Γ.
    pub fn from_laplacians(laplacians: Vec<Option<Matrix>>) -> Result<Self> {
        let mut norms = Vec::with_capacity(laplacians.len());
        let mut gamma = Vec::new();
        for (n, l) in laplacians.iter().enumerate() {
            match l {
                Some(l) => {
                    if l.rows() != l.cols() {
                        return Err(Error::Shape(format!("Laplacian {n} is not square")));
                    }
                    norms.push(spectral_norm(l)?);
                    gamma.push(n);
                }
                None => norms.push(0.0),
            }
        }
        Ok(Self { laplacians, norms, gamma, bandwidths: Vec::new() })
    }

    pub fn order(&self) -> usize {
        self.laplacians.len()
    }

    pub fn gamma(&self) -> &[usize] {
        &self.gamma
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn laplacian(&self, mode: usize) -> Option<&Matrix> {
        self.laplacians.get(mode).and_then(Option::as_ref)
    }

    /// `‖L_mode‖₂`, zero outside Γ.
    pub fn laplacian_norm(&self, mode: usize) -> f64 {
        self.norms.get(mode).copied().unwrap_or(0.0)
    }
}

/// `β_n = ρ_n / Σ_{m∈Γ} ρ_m` with `ρ_n = σ_1(X_(n)) / (2 σ_1(L_n))`; zero outside Γ.
pub fn compute_beta(x0: &DenseTensor, prior: &SmoothnessPrior) -> Result<Vec<f64>> {
    if prior.order() != x0.order() {
        return Err(Error::Shape(format!(
            "prior of order {} for a tensor of order {}",
            prior.order(),
            x0.order()
        )));
    }
    let mut rho = vec![0.0; x0.order()];
    for &n in prior.gamma() {
        let lap_norm = prior.laplacian_norm(n);
        if lap_norm <= 0.0 {
            return Err(Error::DegenerateLaplacian { mode: n });
        }
        rho[n] = spectral_norm(&unfold(x0, n)?)? / (2.0 * lap_norm);
    }
    Ok(normalize_rho(&rho))
}

/// The ratio step of `compute_beta`, exposed for callers that already hold `ρ`.
pub fn normalize_rho(rho: &[f64]) -> Vec<f64> {
    let total: f64 = rho.iter().sum();
    if total > 0.0 {
        rho.iter().map(|r| r / total).collect()
    } else {
        vec![0.0; rho.len()]
    }
}

/// `ω_n = ∏_{i≠n} 1/R_i` with `R_i = ‖U_i‖_*`.
pub fn compute_omega(factors: &[Matrix]) -> Result<Vec<f64>> {
    let radii = factors.iter().map(nuclear_norm).collect::<Result<Vec<_>>>()?;
    omega_from_radii(&radii)
}

pub fn omega_from_radii(radii: &[f64]) -> Result<Vec<f64>> {
    if let Some(mode) = radii.iter().position(|&r| !(r > 0.0)) {
        return Err(Error::ZeroFactor { mode });
    }
    Ok((0..radii.len())
        .map(|n| radii.iter().enumerate().filter(|&(i, _)| i != n).map(|(_, r)| 1.0 / r).product())
        .collect())
}

/// Model weights shared by both solvers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdaptiveWeights {
    pub alpha: f64,
    /// Fidelity penalty of the PALM formulation; ProADM uses `μ` instead.
    pub lambda: f64,
    pub beta: Vec<f64>,
    pub omega: Vec<f64>,
}

impl AdaptiveWeights {
    pub fn check(&self, order: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.beta.len() != order || self.omega.len() != order {
            return Err(Error::Shape(format!(
                "weights for {} / {} modes, tensor has {order}",
                self.beta.len(),
                self.omega.len()
            )));
        }
        Ok(())
    }
}
