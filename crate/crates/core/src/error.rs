use thiserror::Error;

use crate::designs::Design;

pub type Result<T, E = RssError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RssError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("infeasible {design} design for N={population_size}: {reason}")]
    Infeasible {
        design: Design,
        population_size: usize,
        reason: String,
    },

    #[error("cannot standardize a constant population (sigma_x = 0)")]
    DegenerateStandardization,

    #[error("auxiliary-variable ranking requested but the population has no auxiliary values")]
    MissingAuxiliary,

    #[error("population unit with rank {rank} has zero or missing first-order inclusion probability")]
    ZeroInclusion { rank: usize },

    #[error("units with ranks {a} and {b} have zero second-order inclusion probability")]
    ZeroPairInclusion { a: usize, b: usize },

    #[error("variance must be non-negative, got {0}")]
    NegativeVariance(f64),

    #[error("state space of {required} exceeds the configured budget of {budget}; use Monte Carlo")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("confidence bound {bound} = {value:.6} leaves the open interval (0, 1)")]
    IntervalOutOfRange { bound: &'static str, value: f64 },

    #[error("empty estimate: the sample has no measured units")]
    EmptySample,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RssError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        RssError::InvalidArgument(msg.into())
    }

    pub(crate) fn infeasible(design: Design, population_size: usize, reason: impl Into<String>) -> Self {
        RssError::Infeasible {
            design,
            population_size,
            reason: reason.into(),
        }
    }
}
