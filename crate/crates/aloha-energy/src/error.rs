//! Error type shared by every module of the crate.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by model evaluation and the solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A profile was evaluated against a config with a different user count.
    #[error("dimension mismatch: profile has {profile_len} users, config has {config_len}")]
    DimensionMismatch {
        profile_len: usize,
        config_len: usize,
    },

    /// A config violates its invariants (empty user set, non-positive ON cost, ...).
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A profile violates its invariants, or has the wrong variant for an operation.
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    /// A fixed-point iteration ran out of its iteration budget.
    #[error("fixed point did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// An exhaustive search was refused because the instance exceeds its guard.
    #[error("{context}: {actual} users exceeds the limit of {max}; set the override to force the search")]
    TooManyUsers {
        context: &'static str,
        max: usize,
        actual: usize,
    },

    /// Every candidate of an exhaustive search failed to converge.
    #[error("all {candidates} candidate partitions failed to converge")]
    AllCandidatesFailed { candidates: usize },
}
