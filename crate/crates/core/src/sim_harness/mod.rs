//! Episodes, Monte Carlo estimation, and the verification checks.
//!
//! An episode repeats report → decide → transfer → transition for a fixed
//! horizon. Every source of randomness is a dedicated stream of the episode
//! seed, so replaying a scenario with the same seed reproduces the
//! transcript bit for bit, and a deviating run shares all random numbers
//! with its truthful twin.

mod checks;
mod episode;
mod estimate;
mod metrics;
mod scenario;
mod strategy;
mod transcript;

use thiserror::Error;

use crate::bandit_learning::BanditError;
use crate::gittins::GittinsError;
use crate::mdp_core::ModelError;
use crate::mechanisms::MechanismError;

pub use checks::{
    check_budget, check_gittins_optimal, check_ir, check_learning_equiv, check_scaling,
    check_truthful, check_weak_budget, fit_exponent, learning_comparisons, max_deviation_gain,
    run_check, scaling_world, weak_budget_terms, CheckName, CheckReport, ScalingPoint,
    WeakBudgetTerms, BUDGET_TOLERANCE, EXPONENT_RANGE, OPTIMALITY_TOLERANCE, TRUTHFUL_TOLERANCE,
};
pub use episode::{default_horizon, EpisodeTranscript, Prepared};
pub use estimate::{deviation_gain, estimate, replica_values};
pub use metrics::{EpisodeMetrics, KahanSum, Metric, MetricReport, IR_SLACK, Z_975};
pub use scenario::{MechanismKind, Scenario, ScenarioFile, World, WorldFile, SCENARIO_VERSION};
pub use strategy::{assign, Strategy, StrategyAssignment};
pub use transcript::{PeriodRecord, Transcript};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Gittins(#[from] GittinsError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("mechanism `{mechanism}` cannot run on a {world} world")]
    Mismatch { mechanism: &'static str, world: &'static str },
    #[error("check `{check}` does not apply to a {world} world")]
    CheckWorld { check: &'static str, world: &'static str },
    #[error("expected {expected} strategies, got {got}")]
    StrategyCount { expected: usize, got: usize },
    #[error("agent {agent}: {detail}")]
    Strategy { agent: usize, detail: String },
    #[error("agent {agent} reported state {state}, outside its state set")]
    BadReport { agent: usize, state: usize },
    #[error("horizon must be at least 1")]
    Horizon,
    #[error("at least {min} replicas are required, got {got}")]
    Replicas { min: usize, got: usize },
}
