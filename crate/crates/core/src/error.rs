use thiserror::Error;

use crate::mdp::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid MDP: {}", format_violations(.0))]
    InvalidMdp(Vec<Violation>),

    #[error("failed to parse JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("solver did not converge after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("enumeration produced more than {cap} items")]
    EnumerationCap { cap: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("transformation class not supported here: {0}")]
    Unsupported(String),
}

impl Error {
    /// Solver-side failures, as opposed to bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Convergence { .. } | Error::Numerical(_))
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}
