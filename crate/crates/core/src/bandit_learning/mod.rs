//! Bernoulli arms as information-state chains, truncated online Gittins
//! indices, and the learning mechanism that elicits priors and frontier
//! indices from the agents.

mod index;
mod info;
mod mechanism;

use thiserror::Error;

pub use index::{index_at_depth, truncated_index, truncation_depth, IndexOracle, TruncationPolicy, DEFAULT_DEPTH_CAP};
pub use info::{info_transition, parse_prior, InfoState, PriorReport, LAPLACE};
pub use mechanism::{run_centralized, run_learning_mechanism, Arm, BanditWorld, FrontierRequest};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BanditError {
    #[error("prior string contains `{0}`; only 0 and 1 are allowed")]
    BadPrior(char),
    #[error("pseudo-counts ({0}, {1}) must be positive and finite")]
    BadBase(f64, f64),
    #[error("truncation depth {depth} exceeds the cap {cap}")]
    DepthCap { depth: f64, cap: usize },
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("discount {0} is outside (0, 1)")]
    Discount(f64),
    #[error("a learning world needs at least two arms, got {0}")]
    TooFewArms(usize),
    #[error("arm {arm}: ground-truth probability {p} is outside [0, 1]")]
    GroundTruth { arm: usize, p: f64 },
    #[error("expected {expected} strategies, got {got}")]
    StrategyCount { expected: usize, got: usize },
    #[error("agent {agent}: strategy `{kind}` does not apply to a learning world")]
    Strategy { agent: usize, kind: &'static str },
    #[error("agent {agent} returned a malformed response ({value}) to a frontier request")]
    MalformedResponse { agent: usize, value: f64 },
}
