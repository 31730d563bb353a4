//! Low-rank Tucker tensor completion with adaptive nuclear-norm weights,
//! a sparse core and Laplacian smoothness priors on the factor matrices.
//!
//! Two solvers are provided: an extrapolated proximal alternating
//! linearized minimization ([`palm`]) and a proximal ADMM ([`proadm`]).
//! [`complete`] dispatches on [`SolverConfig::solver`].

pub mod config;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod palm;
pub mod priors;
pub mod proadm;
pub mod solver;
pub mod tensor;

pub use config::{RunReport, SolverConfig, SolverKind, Termination, TraceEntry};
pub use error::{Error, Result};
pub use metrics::QualityReport;
pub use priors::{AdaptiveWeights, Bandwidth, SmoothnessPrior};
pub use solver::{complete, mean_fill, Completion};
pub use tensor::{DenseTensor, Matrix, ObservationMask};
