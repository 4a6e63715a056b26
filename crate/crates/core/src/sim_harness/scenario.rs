//! Scenario files.
//!
//! ```json
//! {
//!   "version": 1,
//!   "name": "branching-pair",
//!   "world": { "kind": "mdp", "model": { ... }, "initial_state": ["B", "E"] },
//!   "mechanism": "vcg",
//!   "strategies": [{ "agent": 0, "kind": "fixed-misreport", "map": [0, 0, 0] }],
//!   "horizon": 50,
//!   "replicas": 1000,
//!   "seed": 1
//! }
//! ```
//!
//! `world.kind` is `mdp` (a model file plus labelled initial state),
//! `chains` (`chains`, `discount`, `initial_state`), or `bandit` (`arms`,
//! `discount`, `epsilon`, `r_max`, optional `base`, `m`, `horizon`).
//! Agents without a strategy entry are truthful. `horizon` defaults to the
//! bandit horizon or to a length whose discounted tail is below 1e-8 of the
//! payoff scale; `m` defaults to 16 (or the bandit's own `m`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bandit_learning::BanditWorld;
use crate::gittins::ChainWorld;
use crate::mdp_core::{MarkovChainModel, MdpWorld, ModelError, ModelFile};

use super::strategy::{assign, Strategy, StrategyAssignment};
use super::HarnessError;

pub const SCENARIO_VERSION: u32 = 1;

/// Default number of sample trajectories per simulated policy.
pub const DEFAULT_M: usize = 16;

fn default_replicas() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismKind {
    /// Groves payments: every agent receives the others' reported rewards.
    Groves,
    /// Groves payments minus constant charges from the others' value.
    Vcg,
    /// Gittins index policy with charges from sampled full-world paths.
    Sgv,
    /// Reported index tables with charges from sampled marginal worlds.
    Dgv,
    /// Elicited priors and online index reports on Bernoulli arms.
    Learning,
    /// Negative control: no transfers.
    Withheld,
    /// Negative control: charges that follow the agent's own report.
    ReportCharged,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 7] = [
        MechanismKind::Groves,
        MechanismKind::Vcg,
        MechanismKind::Sgv,
        MechanismKind::Dgv,
        MechanismKind::Learning,
        MechanismKind::Withheld,
        MechanismKind::ReportCharged,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Groves => "groves",
            MechanismKind::Vcg => "vcg",
            MechanismKind::Sgv => "sgv",
            MechanismKind::Dgv => "dgv",
            MechanismKind::Learning => "learning",
            MechanismKind::Withheld => "withheld",
            MechanismKind::ReportCharged => "report-charged",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MechanismKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Parse(format!("unknown mechanism `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorldFile {
    Mdp {
        model: ModelFile,
        initial_state: Vec<String>,
    },
    Chains {
        chains: Vec<MarkovChainModel>,
        discount: f64,
        initial_state: Vec<String>,
    },
    Bandit(BanditWorld),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub name: String,
    pub world: WorldFile,
    pub mechanism: MechanismKind,
    #[serde(default)]
    pub strategies: Vec<StrategyAssignment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// A validated world.
#[derive(Debug, Clone, PartialEq)]
pub enum World {
    Mdp(MdpWorld),
    Chains(ChainWorld),
    Bandit(BanditWorld),
}

impl World {
    pub fn kind(&self) -> &'static str {
        match self {
            World::Mdp(_) => "mdp",
            World::Chains(_) => "chains",
            World::Bandit(_) => "bandit",
        }
    }

    pub fn num_agents(&self) -> usize {
        match self {
            World::Mdp(w) => w.model.num_agents(),
            World::Chains(w) => w.num_agents(),
            World::Bandit(w) => w.arms.len(),
        }
    }

    pub fn discount(&self) -> f64 {
        match self {
            World::Mdp(w) => w.model.discount(),
            World::Chains(w) => w.discount,
            World::Bandit(w) => w.discount,
        }
    }

    fn to_file(&self) -> WorldFile {
        match self {
            World::Mdp(w) => WorldFile::Mdp {
                model: ModelFile::from_model(&w.model),
                initial_state: w.model.state_labels(&w.initial),
            },
            World::Chains(w) => WorldFile::Chains {
                chains: w.chains.clone(),
                discount: w.discount,
                initial_state: w.chains.iter().zip(&w.initial).map(|(c, s)| c.states[*s].clone()).collect(),
            },
            World::Bandit(w) => WorldFile::Bandit(w.clone()),
        }
    }

    fn from_file(file: &WorldFile) -> Result<Self, HarnessError> {
        Ok(match file {
            WorldFile::Mdp { model, initial_state } => {
                let model = model.to_model()?;
                let initial = model.state_from_labels(initial_state)?;
                World::Mdp(MdpWorld::new(model, initial)?)
            }
            WorldFile::Chains { chains, discount, initial_state } => {
                if initial_state.len() != chains.len() {
                    return Err(HarnessError::Parse(format!(
                        "initial_state has {} entries for {} chains",
                        initial_state.len(),
                        chains.len()
                    )));
                }
                let initial = chains
                    .iter()
                    .zip(initial_state)
                    .map(|(c, l)| c.state_index(l).ok_or_else(|| ModelError::UnknownLabel(l.clone())))
                    .collect::<Result<Vec<_>, _>>()?;
                World::Chains(ChainWorld::new(chains.clone(), initial, *discount)?)
            }
            WorldFile::Bandit(b) => {
                b.validate()?;
                World::Bandit(b.clone())
            }
        })
    }
}

/// A validated scenario: a world, a mechanism, and one strategy per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub world: World,
    pub mechanism: MechanismKind,
    pub strategies: Vec<Strategy>,
    pub horizon: Option<usize>,
    pub replicas: usize,
    pub seed: u64,
    pub m: Option<usize>,
}

impl Scenario {
    /// A scenario with truthful agents and default settings.
    pub fn new(name: &str, world: World, mechanism: MechanismKind) -> Self {
        let n = world.num_agents();
        Self {
            name: name.to_string(),
            world,
            mechanism,
            strategies: vec![Strategy::Truthful; n],
            horizon: None,
            replicas: 1,
            seed: 0,
            m: None,
        }
    }

    pub fn from_file(file: &ScenarioFile) -> Result<Self, HarnessError> {
        if file.version != SCENARIO_VERSION {
            return Err(HarnessError::Parse(format!(
                "unsupported scenario version {} (expected {SCENARIO_VERSION})",
                file.version
            )));
        }
        let world = World::from_file(&file.world)?;
        let strategies = assign(world.num_agents(), &file.strategies).map_err(HarnessError::Parse)?;
        Ok(Self {
            name: file.name.clone(),
            world,
            mechanism: file.mechanism,
            strategies,
            horizon: file.horizon,
            replicas: file.replicas,
            seed: file.seed,
            m: file.m,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Self::from_file(&ScenarioFile::from_json(text)?)
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            version: SCENARIO_VERSION,
            name: self.name.clone(),
            world: self.world.to_file(),
            mechanism: self.mechanism,
            strategies: self
                .strategies
                .iter()
                .enumerate()
                .filter(|(_, s)| **s != Strategy::Truthful)
                .map(|(agent, s)| StrategyAssignment { agent, strategy: s.clone() })
                .collect(),
            horizon: self.horizon,
            replicas: self.replicas,
            seed: self.seed,
            m: self.m,
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.to_file()).expect("scenario serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Number of sample trajectories per simulated policy.
    pub fn trajectories(&self) -> usize {
        match (&self.world, self.m) {
            (_, Some(m)) => m,
            (World::Bandit(b), None) => b.m,
            _ => DEFAULT_M,
        }
    }

    pub fn with_mechanism(&self, mechanism: MechanismKind) -> Self {
        Self { mechanism, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn worlds_round_trip_through_files() {
        for world in [
            World::Mdp(fixtures::branching_pair(0.9)),
            World::Chains(fixtures::deceptive_pair_chains()),
            World::Bandit(fixtures::two_arm_bandit()),
        ] {
            let scenario = Scenario::new("x", world, MechanismKind::Vcg);
            let text = scenario.to_file().to_json();
            let back = Scenario::from_json(&text).unwrap();
            assert_eq!(back, scenario);
            assert_eq!(back.hash(), scenario.hash());
        }
    }

    #[test]
    fn mechanism_names_parse() {
        for k in MechanismKind::ALL {
            assert_eq!(k.name().parse::<MechanismKind>().unwrap(), k);
        }
        assert!("auction".parse::<MechanismKind>().is_err());
    }

    #[test]
    fn rejects_unknown_version_and_fields() {
        let mut file = Scenario::new("x", World::Mdp(fixtures::branching_pair(0.9)), MechanismKind::Vcg).to_file();
        file.version = 7;
        assert!(Scenario::from_file(&file).is_err());
        let text = r#"{"version": 1, "name": "x", "mechanism": "vcg", "oops": 1,
            "world": {"kind": "bandit", "arms": [], "discount": 0.9, "epsilon": 1e-6, "r_max": 1, "m": 1, "horizon": 1}}"#;
        assert!(matches!(Scenario::from_json(text), Err(HarnessError::Parse(_))));
    }

    #[test]
    fn strategies_change_the_hash() {
        let base = Scenario::new("x", World::Mdp(fixtures::branching_pair(0.9)), MechanismKind::Vcg);
        let mut other = base.clone();
        other.strategies[0] = Strategy::FixedMisreport { map: vec![1, 1, 2] };
        assert_ne!(base.hash(), other.hash());
    }
}
