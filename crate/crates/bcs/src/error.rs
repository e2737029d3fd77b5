//! Error type shared by the library and the CLI.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, BcsError>;

#[derive(Debug, Error)]
pub enum BcsError {
    /// Malformed arguments: NaN inputs, mismatched grids, bad sector index.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Valid input outside the domain of the requested quantity
    /// (negative temperature, mu <= 0 where a Fermi circle is required, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The operator stayed negative up to the bracket cap: no critical
    /// temperature below `t_max` in sector `ell`.
    #[error("no transition in sector {ell}: operator still negative at T = {t_max}")]
    NoTransition { ell: i32, t_max: f64 },

    /// The gap iteration produced NaN. Carries the tail of the residual
    /// history for diagnosis.
    #[error("gap iteration diverged after {iterations} iterations; residual trail {trail:?}")]
    Divergence { iterations: usize, trail: Vec<f64> },

    /// Admissibility violated: a state left 0 <= Gamma <= 1 by more than
    /// the numerical slack.
    #[error("admissibility error: {0}")]
    Admissibility(String),

    /// Configuration file problems (parse errors, unknown keys, bad values).
    #[error("config error: {0}")]
    Config(String),

    /// Internal numeric failure (eigensolver breakdown, fit with too few
    /// points, quadrature not converging).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
