//! Dense state-space view and the fixed-step Radau IIA benchmark solver.
//!
//! The dense derivative is the same set of closures the event engine runs,
//! evaluated at a common state vector, so the oracle integrates exactly the
//! equations the quantized solver quantizes.

mod dense;
mod equilibrium;
mod radau;

pub use dense::DenseSystem;
pub use equilibrium::{snap_to_quanta, solve_equilibrium, EquilibriumReport};
pub use radau::{integrate, radau_step, RadauConfig, Trajectory};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("Newton failed to converge after {iterations} iterations; residual history: {history:?}")]
    NewtonDiverged {
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("linear solve failed (singular iteration matrix) at t = {t}")]
    SingularMatrix { t: f64 },

    #[error("stage Newton diverged at t = {t} after {iterations} iterations")]
    StageDiverged { t: f64, iterations: usize },

    #[error("equilibrium drifted after quantum snap: residual {residual} exceeds {limit}")]
    SnapResidual { residual: f64, limit: f64 },

    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
}
