//! Transfer rules for the sequential Groves and VCG mechanisms, their
//! precomputed charges, and an exact best-response oracle for testing
//! truthfulness.

mod oracle;
mod rules;

use thiserror::Error;

use crate::mdp_core::ModelError;

pub use oracle::{
    best_response_value, budget_identity, system_values, truthful_payoffs, BestResponse,
    BudgetIdentity,
};
pub use rules::{
    groves_transfers, precompute_vcg_charges, vcg_transfers, ChargeSchedule, Groves, Planner,
    ReportLinkedCharge, TransferRule, TransferVector, Vcg, WithheldPayments,
};

/// A claimed local state. The message space of every agent is its own
/// state set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Report {
    pub agent: usize,
    pub state: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanismError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("transfer rule `{0}` reads unreported history")]
    HistoryDependent(String),
    #[error("agent {agent} reported state {state}, outside its state set")]
    BadReport { agent: usize, state: usize },
    #[error("unknown mechanism `{0}`")]
    UnknownMechanism(String),
}
