//! Coordination mechanisms for self-interested agents whose states evolve
//! privately as Markov processes.
//!
//! A central planner elicits state reports, implements a joint action, and
//! pays transfers that make truthful reporting a Markov perfect equilibrium.

pub mod fixtures;
pub mod mdp_core;
pub mod rng;
pub mod mechanisms;
pub mod gittins;
pub mod bandit_learning;
pub mod sim_harness;
