//! Gittins indices for finite Markov chains, the index policy, and the
//! sampled-trajectory transfers of the sequential and distributed
//! Gittins–VCG mechanisms.

mod index;
mod trajectory;
mod world;

use thiserror::Error;

use crate::mdp_core::ModelError;

pub use index::{
    argmax_index, compute_tables, gittins_index, index_joint_policy, index_policy,
    reported_tables, GittinsTable, TableEntry, INDEX_TOLERANCE,
};
pub use trajectory::{
    advance_samples, dgv_charges, dgv_transfers, sample_charge, sgv_transfers, SampleTrajectory,
};
pub use world::ChainWorld;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GittinsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("tolerance {0} must be positive")]
    Tolerance(f64),
    #[error("state {state} is not in chain {agent}")]
    MissingEntry { agent: usize, state: usize },
    #[error("expected {expected} tables, got {got}")]
    TableCount { expected: usize, got: usize },
    #[error("index {value} for agent {agent} state {state} is not finite")]
    NonFinite { agent: usize, state: usize, value: f64 },
    #[error("at least one sample trajectory is required")]
    NoSamples,
    #[error("sample trajectories have not reached period {0}")]
    NotAdvanced(usize),
    #[error("initial state has {got} components for {expected} chains")]
    InitialState { expected: usize, got: usize },
}
