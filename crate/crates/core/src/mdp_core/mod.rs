//! Finite agent MDPs, their joint composition, and exact solvers.
//!
//! Joint state indices are mixed-radix with agent 0 as the most significant
//! digit, so index order coincides with lexicographic order on local states.

mod evaluate;
mod io;
mod model;
mod solve;
mod step;

use thiserror::Error;

pub use evaluate::{
    evaluate_policy, evaluate_policy_subset, evaluate_rewards, policy_value, reachable_states,
    solve_markov_reward, PolicyValues, DENSE_LIMIT,
};
pub use io::{AgentFile, FeasibilityFile, FeasibilityKind, ModelFile};
pub use model::{
    build_joint, AgentModel, Feasibility, JointAction, JointModel, JointState, MarkovChainModel,
    MAX_JOINT_STATES, ROW_SUM_TOLERANCE,
};
pub use solve::{
    bellman_residual, extract_policy, solve, value_iterate, Policy, ValueFunction,
    DEFAULT_TOLERANCE,
};
pub use step::{sample_index, step};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("a joint model needs at least one agent")]
    NoAgents,
    #[error("agent {agent} has no states")]
    EmptyStates { agent: usize },
    #[error("agent {agent} does not declare its null action")]
    MissingNullAction { agent: usize },
    #[error("agent {agent}: {detail}")]
    Shape { agent: usize, detail: String },
    #[error("agent {agent}: transition row ({state}, {action}) is not a distribution (sum {sum})")]
    BadRow { agent: usize, state: usize, action: usize, sum: f64 },
    #[error("agent {agent}: reward ({state}, {action}) = {reward} is not a nonnegative number")]
    NegativeReward { agent: usize, state: usize, action: usize, reward: f64 },
    #[error("agent at position {position} carries id {id}")]
    AgentId { position: usize, id: usize },
    #[error("discount {0} is outside (0, 1)")]
    Discount(f64),
    #[error("the all-null joint action must be feasible")]
    NullInfeasible,
    #[error("joint action {0:?} is not a valid action profile")]
    BadJointAction(Vec<usize>),
    #[error("joint action {0:?} is infeasible")]
    Infeasible(Vec<usize>),
    #[error("joint state {0:?} is out of range")]
    BadJointState(Vec<usize>),
    #[error("joint state space exceeds {MAX_JOINT_STATES} states")]
    TooLarge,
    #[error("no agent with id {0}")]
    NoSuchAgent(usize),
    #[error("tolerance {0} must be positive")]
    Tolerance(f64),
    #[error("value iteration did not converge")]
    NoConvergence,
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("malformed model file: {0}")]
    Parse(String),
}

/// A joint model together with its known initial joint state.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpWorld {
    pub model: JointModel,
    pub initial: JointState,
}

impl MdpWorld {
    pub fn new(model: JointModel, initial: JointState) -> Result<Self, ModelError> {
        model.validate_state(&initial)?;
        Ok(Self { model, initial })
    }

    /// Largest single-period reward any agent can receive.
    pub fn max_reward(&self) -> f64 {
        self.model
            .agents()
            .iter()
            .flat_map(|a| a.rewards().iter().flatten().copied())
            .fold(0.0, f64::max)
    }
}
