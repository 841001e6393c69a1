use std::fmt;

use thiserror::Error;

/// A single rejected parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join(.0))]
    InvalidParams(Vec<Violation>),

    #[error("unknown state space kind `{0}`")]
    UnknownSpaceKind(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("improper distribution: {0}")]
    ImproperDistribution(String),

    #[error("singular diagonal block at {path:?}")]
    SingularBlock { path: Vec<usize> },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("matrix does not have the expected block-triangular structure: {0}")]
    NotStructured(String),

    #[error("dimension {dim} exceeds cap {cap} ({what}); use the rate-approximation path")]
    DimensionCap { what: String, dim: usize, cap: usize },

    #[error("unstable: upDrift={up_drift:.17e}, downDrift={down_drift:.17e}")]
    Unstable { up_drift: f64, down_drift: f64 },

    #[error("rate matrix iteration did not converge after {iterations} iterations (last step {last_step:.3e}, residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        last_step: f64,
        residual: f64,
    },

    #[error("boundary system is rank deficient: {0}")]
    RankDeficient(String),

    #[error("queue simulation left the level cap {cap} (max level reached {max_level}, time {time:.3e})")]
    QueueTruncation {
        cap: usize,
        max_level: usize,
        time: f64,
    },
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ImproperDistribution(_)
                | Error::SingularBlock { .. }
                | Error::Singular(_)
                | Error::NotStructured(_)
                | Error::DimensionCap { .. }
                | Error::Unstable { .. }
                | Error::NonConvergence { .. }
                | Error::RankDeficient(_)
                | Error::QueueTruncation { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
