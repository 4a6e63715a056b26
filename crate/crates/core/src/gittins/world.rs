use serde::{Deserialize, Serialize};

use crate::mdp_core::{build_joint, Feasibility, JointState, MarkovChainModel, MdpWorld, ModelError};

use super::GittinsError;

/// Independent Markov chains under single activation, with a common
/// discount and initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainWorld {
    pub chains: Vec<MarkovChainModel>,
    pub initial: Vec<usize>,
    pub discount: f64,
}

impl ChainWorld {
    pub fn new(chains: Vec<MarkovChainModel>, initial: Vec<usize>, discount: f64) -> Result<Self, GittinsError> {
        if chains.is_empty() {
            return Err(ModelError::NoAgents.into());
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(ModelError::Discount(discount).into());
        }
        if initial.len() != chains.len() {
            return Err(GittinsError::InitialState { expected: chains.len(), got: initial.len() });
        }
        for (i, c) in chains.iter().enumerate() {
            if c.id != i {
                return Err(ModelError::AgentId { position: i, id: c.id }.into());
            }
            c.to_agent_model()?;
            if initial[i] >= c.num_states() {
                return Err(GittinsError::MissingEntry { agent: i, state: initial[i] });
            }
        }
        Ok(Self { chains, initial, discount })
    }

    pub fn num_agents(&self) -> usize {
        self.chains.len()
    }

    /// The equivalent joint MDP with single-activation feasibility.
    pub fn joint(&self) -> Result<MdpWorld, ModelError> {
        let agents = self
            .chains
            .iter()
            .map(|c| c.to_agent_model())
            .collect::<Result<Vec<_>, _>>()?;
        let model = build_joint(agents, Feasibility::SingleActivation, self.discount)?;
        MdpWorld::new(model, JointState(self.initial.clone()))
    }

    /// The marginal world without agent `exclude`; remaining ids are
    /// compacted. Returns `None` when no chain would remain.
    pub fn without(&self, exclude: usize) -> Option<ChainWorld> {
        if self.chains.len() <= 1 {
            return None;
        }
        let keep: Vec<usize> = (0..self.chains.len()).filter(|j| *j != exclude).collect();
        let chains = keep
            .iter()
            .enumerate()
            .map(|(k, j)| MarkovChainModel { id: k, ..self.chains[*j].clone() })
            .collect();
        let initial = keep.iter().map(|j| self.initial[*j]).collect();
        Some(ChainWorld { chains, initial, discount: self.discount })
    }

    pub fn max_reward(&self) -> f64 {
        self.chains
            .iter()
            .flat_map(|c| c.reward.iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            chains: self.chains.iter().map(|c| c.scaled(factor)).collect(),
            ..self.clone()
        }
    }
}
