//! Agent reporting strategies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::SimRng;

/// How an agent reports. Each kind only applies to the worlds whose message
/// space it speaks about; running it elsewhere is an input error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Strategy {
    /// Report the true local state (and true indices).
    Truthful,
    /// Report `map[s]` whenever the true local state is `s`.
    FixedMisreport { map: Vec<usize> },
    /// With the given probability report a uniformly drawn state.
    RandomMisreport { probability: f64 },
    /// Report this index table instead of the true one.
    IndexManipulation { table: Vec<f64> },
    /// Add `bias` to every index reported for sample-trajectory frontiers.
    FrontierMisreport { bias: f64 },
    /// Report this prior string and answer consistently with it.
    ConsistentWrongModel { prior: String },
    /// Report the true state but add `boost` to its index.
    StateIndexInconsistent { boost: f64 },
}

/// A strategy bound to the agent that plays it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyAssignment {
    pub agent: usize,
    #[serde(flatten)]
    pub strategy: Strategy,
}

impl Strategy {
    pub fn kind(&self) -> &'static str {
        match self {
            Strategy::Truthful => "truthful",
            Strategy::FixedMisreport { .. } => "fixed-misreport",
            Strategy::RandomMisreport { .. } => "random-misreport",
            Strategy::IndexManipulation { .. } => "index-manipulation",
            Strategy::FrontierMisreport { .. } => "frontier-misreport",
            Strategy::ConsistentWrongModel { .. } => "consistent-wrong-model",
            Strategy::StateIndexInconsistent { .. } => "state-index-inconsistent",
        }
    }

    /// Whether the strategy can be played in a world whose agents report
    /// discrete local states, optionally with index tables.
    pub fn fits_state_world(&self, states: usize, with_tables: bool) -> bool {
        match self {
            Strategy::Truthful => true,
            Strategy::FixedMisreport { map } => map.len() == states,
            Strategy::RandomMisreport { probability } => (0.0..=1.0).contains(probability),
            Strategy::IndexManipulation { table } => with_tables && table.len() == states,
            _ => false,
        }
    }

    /// Whether the strategy can be played in a learning world.
    pub fn fits_learning_world(&self) -> bool {
        match self {
            Strategy::Truthful => true,
            Strategy::FrontierMisreport { bias } | Strategy::StateIndexInconsistent { boost: bias } => {
                bias.is_finite()
            }
            Strategy::ConsistentWrongModel { .. } => true,
            _ => false,
        }
    }

    /// The local state reported when the true one is `truth`. Draws from
    /// `rng` only for random misreports.
    pub fn report_state(&self, truth: usize, states: usize, rng: &mut SimRng) -> usize {
        match self {
            Strategy::FixedMisreport { map } => map[truth],
            Strategy::RandomMisreport { probability } => {
                let u: f64 = rng.random();
                if u < *probability {
                    rng.random_range(0..states)
                } else {
                    truth
                }
            }
            _ => truth,
        }
    }

    /// The index table reported instead of the true one, if any.
    pub fn table_override(&self) -> Option<Vec<f64>> {
        match self {
            Strategy::IndexManipulation { table } => Some(table.clone()),
            _ => None,
        }
    }
}

/// Expands per-agent assignments into one strategy per agent; agents
/// without an assignment are truthful.
pub fn assign(agents: usize, assignments: &[StrategyAssignment]) -> Result<Vec<Strategy>, String> {
    let mut out = vec![Strategy::Truthful; agents];
    let mut seen = vec![false; agents];
    for a in assignments {
        if a.agent >= agents {
            return Err(format!("strategy for agent {} but the world has {agents} agents", a.agent));
        }
        if seen[a.agent] {
            return Err(format!("agent {} has more than one strategy", a.agent));
        }
        seen[a.agent] = true;
        out[a.agent] = a.strategy.clone();
    }
    Ok(out)
}
