//! Solver configuration and run reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::QualityReport;
use crate::priors::Bandwidth;

/// Default α (sparsity/low-rank trade-off).
pub const DEFAULT_ALPHA: f64 = 0.01;
/// Default PALM fidelity penalty λ.
pub const DEFAULT_LAMBDA: f64 = 1.0;
/// Initial ProADM penalty μ⁰.
pub const DEFAULT_MU0: f64 = 1e-2;
/// ProADM penalty growth factor; must lie in `RHO_RANGE`.
pub const DEFAULT_RHO: f64 = 1.1;
pub const RHO_RANGE: (f64, f64) = (1.1, 1.2);
pub const DEFAULT_TOL: f64 = 1e-4;
/// The tighter stopping tolerance quoted alongside the default.
pub const STRICT_TOL: f64 = 1e-5;
pub const DEFAULT_MAX_ITERS: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Palm,
    Proadm,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "palm" => Ok(SolverKind::Palm),
            "proadm" => Ok(SolverKind::Proadm),
            other => Err(Error::Config(format!("unknown solver {other:?} (expected palm or proadm)"))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Palm => "palm",
            SolverKind::Proadm => "proadm",
        })
    }
}

/// All tunables of one completion run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub solver: SolverKind,
    pub alpha: f64,
    pub lambda: f64,
    pub mu0: f64,
    pub rho: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Smooth modes (zero-based). `None` means every mode.
    pub gamma: Option<Vec<usize>>,
    pub bandwidth: Bandwidth,
    /// Use `1.1 · L` for every Lipschitz step.
    pub inflate_lipschitz: bool,
    /// When set to `ν`, clip core and factor entries to `max(ν, ‖T‖_∞)`.
    pub clamp: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            solver: SolverKind::Palm,
            alpha: DEFAULT_ALPHA,
            lambda: DEFAULT_LAMBDA,
            mu0: DEFAULT_MU0,
            rho: DEFAULT_RHO,
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            seed: 0,
            gamma: None,
            bandwidth: Bandwidth::Auto,
            inflate_lipschitz: false,
            clamp: None,
        }
    }
}

impl SolverConfig {
    pub fn palm() -> Self {
        Self::default()
    }

    pub fn proadm() -> Self {
        Self { solver: SolverKind::Proadm, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return bad(format!("mu0 must be positive, got {}", self.mu0));
        }
        if !(self.rho >= RHO_RANGE.0 && self.rho <= RHO_RANGE.1) {
            return bad(format!("rho must lie in [{}, {}], got {}", RHO_RANGE.0, RHO_RANGE.1, self.rho));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("bandwidth must be positive, got {h}"));
            }
        }
        if let Some(nu) = self.clamp {
            if !(nu > 0.0) {
                return bad(format!("clamp bound must be positive, got {nu}"));
            }
        }
        Ok(())
    }

    /// Resolved smooth-mode set for a tensor of the given order.
    pub fn gamma_for(&self, order: usize) -> Result<Vec<usize>> {
        match &self.gamma {
            None => Ok((0..order).collect()),
            Some(g) => {
                if let Some(&m) = g.iter().find(|&&m| m >= order) {
                    return Err(Error::Config(format!("smooth mode {} exceeds tensor order {order}", m + 1)));
                }
                Ok(g.clone())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Tolerance,
    MaxIters,
    Divergence,
}

/// One row of the convergence trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// 1-based iteration count.
    pub k: usize,
    /// PALM objective Φ or ProADM augmented Lagrangian.
    pub objective: f64,
    /// The stopping quantity: `successive_change` for PALM,
    /// `observed_residual` for ProADM.
    pub rel_change: f64,
    /// `‖X^{k+1} − X^k‖ / ‖X^k‖`.
    pub successive_change: f64,
    /// `‖(M − T)_Ω‖ / ‖T_Ω‖` with `M = G×U` for PALM and `M = X` for ProADM.
    pub observed_residual: f64,
    /// RSE of the completed estimate against ground truth, when supplied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rse: Option<f64>,
    /// PALM only: the extrapolated step was rejected and redone.
    #[serde(default)]
    pub restarted: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub elapsed_ms: Option<f64>,
}

/// Everything a run reports besides the completed tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: SolverConfig,
    pub dims: Vec<usize>,
    pub observed: usize,
    pub gamma: Vec<usize>,
    pub bandwidths: Vec<f64>,
    pub beta: Vec<f64>,
    pub omega: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: Vec<TraceEntry>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub quality: Option<QualityReport>,
}

impl RunReport {
    /// Drops wall-clock fields so two identical runs serialize identically.
    pub fn strip_timing(&mut self) {
        self.trace.iter_mut().for_each(|e| e.elapsed_ms = None);
    }
}
