//! Crate-wide error types.

use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("netlist error: {0}")]
    Netlist(#[from] crate::lim::NetlistError),

    #[error("engine error: {0}")]
    Engine(#[from] crate::qss::EngineError),

    #[error("solver error: {0}")]
    Solver(#[from] crate::solver::SolverError),

    #[error("analysis error: {0}")]
    Analysis(#[from] crate::analysis::AnalysisError),

    #[error("config error: {0}")]
    Config(String),

    #[error("device error: {0}")]
    Device(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
