//! Placeholder.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("placeholder")]
    Placeholder,
}
