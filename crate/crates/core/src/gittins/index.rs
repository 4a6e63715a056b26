//! Restart-in-state index computation.
//!
//! For a target state `t`, every state offers two actions: continue the
//! chain from where it is, or restart it from `t`. The optimal value of
//! `t` in that MDP, times `(1−γ)`, is the Gittins index of `t` expressed as
//! an equivalent constant per-period reward.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mdp_core::{JointAction, JointModel, MarkovChainModel, ModelError, Policy};

use super::world::ChainWorld;
use super::GittinsError;

/// Residual used when building index tables.
pub const INDEX_TOLERANCE: f64 = 1e-13;

const MAX_SWEEPS: usize = 100_000_000;

pub fn gittins_index(
    chain: &MarkovChainModel,
    target: usize,
    discount: f64,
    tol: f64,
) -> Result<f64, GittinsError> {
    if !(tol > 0.0) {
        return Err(GittinsError::Tolerance(tol));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(ModelError::Discount(discount).into());
    }
    let k = chain.num_states();
    if target >= k {
        return Err(GittinsError::MissingEntry { agent: chain.id, state: target });
    }
    let rows: Vec<Vec<(usize, f64)>> = chain
        .transition
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(j, p)| (j, *p)).collect())
        .collect();
    let cont = |v: &[f64], x: usize| -> f64 {
        chain.reward[x] + discount * rows[x].iter().map(|(j, p)| p * v[*j]).sum::<f64>()
    };
    let mut v = vec![0.0; k];
    for _ in 0..MAX_SWEEPS {
        let restart = cont(&v, target);
        let next: Vec<f64> = (0..k).map(|x| cont(&v, x).max(restart)).collect();
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta <= tol {
            return Ok((1.0 - discount) * v[target]);
        }
    }
    Err(ModelError::NoConvergence.into())
}

/// Index of every state of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GittinsTable {
    pub agent: usize,
    pub values: Vec<f64>,
}

/// One row of an exported table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub agent: usize,
    pub state: String,
    pub index: f64,
}

impl GittinsTable {
    pub fn compute(chain: &MarkovChainModel, discount: f64, tol: f64) -> Result<Self, GittinsError> {
        let values = (0..chain.num_states())
            .map(|s| gittins_index(chain, s, discount, tol))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { agent: chain.id, values })
    }

    pub fn index(&self, state: usize) -> Result<f64, GittinsError> {
        self.values
            .get(state)
            .copied()
            .ok_or(GittinsError::MissingEntry { agent: self.agent, state })
    }

    pub fn entries(&self, chain: &MarkovChainModel) -> Vec<TableEntry> {
        self.values
            .iter()
            .zip(&chain.states)
            .map(|(v, s)| TableEntry { agent: self.agent, state: s.clone(), index: *v })
            .collect()
    }
}

/// Tables for every chain, computed independently in parallel.
pub fn compute_tables(world: &ChainWorld, tol: f64) -> Result<Vec<GittinsTable>, GittinsError> {
    world
        .chains
        .par_iter()
        .map(|c| GittinsTable::compute(c, world.discount, tol))
        .collect()
}

/// Highest-index agent among those `eligible`, ties to the lowest id.
/// Adds the number of index comparisons made to `comparisons`.
pub fn argmax_index(
    tables: &[GittinsTable],
    states: &[usize],
    eligible: impl Fn(usize) -> bool,
    comparisons: &mut u64,
) -> Result<Option<usize>, GittinsError> {
    if tables.len() != states.len() {
        return Err(GittinsError::TableCount { expected: states.len(), got: tables.len() });
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, table) in tables.iter().enumerate() {
        if !eligible(i) {
            continue;
        }
        let g = table.index(states[i])?;
        best = match best {
            None => Some((i, g)),
            Some((b, bg)) => {
                *comparisons += 1;
                if g > bg {
                    Some((i, g))
                } else {
                    Some((b, bg))
                }
            }
        };
    }
    Ok(best.map(|(i, _)| i))
}

/// The agent to activate: maximal index at its state, ties to lowest id.
pub fn index_policy(tables: &[GittinsTable], states: &[usize]) -> Result<usize, GittinsError> {
    let mut count = 0;
    argmax_index(tables, states, |_| true, &mut count)?
        .ok_or(GittinsError::TableCount { expected: 1, got: 0 })
}

/// The index policy as a joint policy of a single-activation chain model.
pub fn index_joint_policy(model: &JointModel, tables: &[GittinsTable]) -> Result<Policy, GittinsError> {
    let n = model.num_agents();
    let mut failure = None;
    let policy = Policy::from_fn(model, |s| {
        let mut action = vec![MarkovChainModel::NULL; n];
        match index_policy(tables, s.components()) {
            Ok(i) => action[i] = MarkovChainModel::ACTIVATE,
            Err(e) => failure = Some(e),
        }
        JointAction(action)
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(policy),
    }
}

/// The tables the planner acts on: each agent's reported override, or its
/// true table where there is none.
pub fn reported_tables(
    truth: &[GittinsTable],
    overrides: &[Option<Vec<f64>>],
) -> Result<Vec<GittinsTable>, GittinsError> {
    if overrides.len() != truth.len() {
        return Err(GittinsError::TableCount { expected: truth.len(), got: overrides.len() });
    }
    truth
        .iter()
        .zip(overrides)
        .map(|(t, o)| match o {
            None => Ok(t.clone()),
            Some(values) => {
                if values.len() != t.values.len() {
                    return Err(GittinsError::MissingEntry { agent: t.agent, state: values.len().min(t.values.len()) });
                }
                if let Some((state, value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                    return Err(GittinsError::NonFinite { agent: t.agent, state, value: *value });
                }
                Ok(GittinsTable { agent: t.agent, values: values.clone() })
            }
        })
        .collect()
}
