//! Sample trajectories of index policies and the transfers built on them.

use rayon::prelude::*;

use crate::mdp_core::{sample_index, MarkovChainModel};
use crate::mechanisms::TransferVector;
use crate::rng::{stream, SimRng, StreamLabel};

use super::index::{argmax_index, GittinsTable};
use super::GittinsError;

/// One simulated path of the index policy, either over all agents
/// (`StreamLabel::Optimal`) or over all but one (`StreamLabel::Marginal(i)`).
#[derive(Debug, Clone)]
pub struct SampleTrajectory {
    label: StreamLabel,
    replica: usize,
    state: Vec<usize>,
    log: Vec<f64>,
    activated: Vec<Option<usize>>,
    rng: SimRng,
}

impl SampleTrajectory {
    /// A fresh trajectory from `initial` (a full joint state; the excluded
    /// agent's component is carried but never read).
    pub fn new(label: StreamLabel, replica: usize, initial: Vec<usize>, seed: u64) -> Self {
        Self {
            label,
            replica,
            state: initial,
            log: Vec::new(),
            activated: Vec::new(),
            rng: stream(seed, label, replica as u64),
        }
    }

    pub fn label(&self) -> StreamLabel {
        self.label
    }

    pub fn replica(&self) -> usize {
        self.replica
    }

    pub fn state(&self) -> &[usize] {
        &self.state
    }

    /// Realized system reward `r(X, t)` per simulated period.
    pub fn log(&self) -> &[f64] {
        &self.log
    }

    /// Agent activated in each simulated period (`None` if nobody was
    /// eligible).
    pub fn activations(&self) -> &[Option<usize>] {
        &self.activated
    }

    pub fn excluded(&self) -> Option<usize> {
        match self.label {
            StreamLabel::Marginal(i) => Some(i),
            _ => None,
        }
    }

    /// Simulates one period: activate the eligible agent with the highest
    /// reported index, log its reward, and sample its transition from the
    /// true chain. Returns the number of index comparisons made.
    pub fn advance(&mut self, chains: &[MarkovChainModel], tables: &[GittinsTable]) -> Result<u64, GittinsError> {
        let excluded = self.excluded();
        let mut comparisons = 0;
        let winner = argmax_index(tables, &self.state, |j| Some(j) != excluded, &mut comparisons)?;
        match winner {
            Some(j) => {
                let s = self.state[j];
                self.log.push(chains[j].reward[s]);
                self.state[j] = sample_index(&chains[j].transition[s], &mut self.rng);
            }
            None => self.log.push(0.0),
        }
        self.activated.push(winner);
        Ok(comparisons)
    }
}

/// Advances every trajectory by one period (in parallel; each trajectory
/// owns its stream, so the result does not depend on scheduling). Returns
/// the total number of index comparisons.
pub fn advance_samples(
    trajectories: &mut [SampleTrajectory],
    chains: &[MarkovChainModel],
    tables: &[GittinsTable],
) -> Result<u64, GittinsError> {
    trajectories
        .par_iter_mut()
        .map(|x| x.advance(chains, tables))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Sample-average simulated system reward at period `t`.
pub fn sample_charge(samples: &[SampleTrajectory], t: usize) -> Result<f64, GittinsError> {
    if samples.is_empty() {
        return Err(GittinsError::NoSamples);
    }
    let mut total = 0.0;
    for x in samples {
        total += *x.log.get(t).ok_or(GittinsError::NotAdvanced(t))?;
    }
    Ok(total / samples.len() as f64)
}

/// Sequential Gittins–VCG transfers: the activated agent pays the
/// sample-average reward of the full-world trajectories; every other agent
/// receives the activated agent's reported reward minus the same average.
pub fn sgv_transfers(
    agents: usize,
    activated: usize,
    reward: f64,
    samples: &[SampleTrajectory],
    t: usize,
) -> Result<TransferVector, GittinsError> {
    let charge = sample_charge(samples, t)?;
    Ok(TransferVector(
        (0..agents)
            .map(|j| if j == activated { -charge } else { reward - charge })
            .collect(),
    ))
}

/// Each agent's charge at `t`, read only from its own marginal trajectories.
/// An agent whose marginal world is empty is charged nothing.
pub fn dgv_charges(marginal: &[Vec<SampleTrajectory>], t: usize) -> Result<Vec<f64>, GittinsError> {
    marginal.iter().map(|samples| sample_charge(samples, t)).collect()
}

/// Distributed Gittins–VCG transfers: as [`sgv_transfers`], but agent `j`'s
/// charge averages its own marginal-world trajectories.
pub fn dgv_transfers(
    activated: usize,
    reward: f64,
    marginal: &[Vec<SampleTrajectory>],
    t: usize,
) -> Result<TransferVector, GittinsError> {
    let charges = dgv_charges(marginal, t)?;
    Ok(TransferVector(
        charges
            .iter()
            .enumerate()
            .map(|(j, c)| if j == activated { -c } else { reward - c })
            .collect(),
    ))
}
