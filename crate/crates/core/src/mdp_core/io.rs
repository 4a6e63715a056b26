//! JSON model files.
//!
//! ```json
//! {
//!   "agents": [
//!     { "id": 0, "states": ["B", "C"], "actions": ["go", "null"], "null_action": "null",
//!       "transition": [[[0.0, 1.0], [1.0, 0.0]], [[0.0, 1.0], [0.0, 1.0]]],
//!       "reward": [[0.5, 0.0], [0.0, 0.0]] }
//!   ],
//!   "feasibility": { "kind": "explicit", "allowed": [["go"], ["null"]] },
//!   "discount": 0.9
//! }
//! ```
//!
//! `transition[s][a]` is the distribution over next states and `reward[s][a]`
//! the reward for taking action `a` in state `s`. `null_action` defaults to
//! `"null"`. `allowed` lists joint actions by action label and is only read
//! for the `explicit` kind.

use serde::{Deserialize, Serialize};

use super::model::{build_joint, AgentModel, Feasibility, JointAction, JointModel};
use super::ModelError;

fn default_null() -> String {
    "null".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentFile {
    pub id: usize,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    #[serde(default = "default_null")]
    pub null_action: String,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityKind {
    All,
    SingleActivation,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilityFile {
    pub kind: FeasibilityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub agents: Vec<AgentFile>,
    pub feasibility: FeasibilityFile,
    pub discount: f64,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }

    pub fn to_model(&self) -> Result<JointModel, ModelError> {
        let agents = self
            .agents
            .iter()
            .map(|a| {
                let null = a
                    .actions
                    .iter()
                    .position(|x| *x == a.null_action)
                    .ok_or(ModelError::MissingNullAction { agent: a.id })?;
                AgentModel::new(
                    a.id,
                    a.states.clone(),
                    a.actions.clone(),
                    null,
                    a.transition.clone(),
                    a.reward.clone(),
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let feasibility = match self.feasibility.kind {
            FeasibilityKind::All => Feasibility::All,
            FeasibilityKind::SingleActivation => Feasibility::SingleActivation,
            FeasibilityKind::Explicit => {
                let allowed = self.feasibility.allowed.as_ref().ok_or_else(|| {
                    ModelError::Parse("explicit feasibility needs an `allowed` list".into())
                })?;
                let mut actions = allowed
                    .iter()
                    .map(|labels| {
                        if labels.len() != agents.len() {
                            return Err(ModelError::UnknownLabel(labels.join(",")));
                        }
                        labels
                            .iter()
                            .zip(&agents)
                            .map(|(l, a)| {
                                a.action_index(l).ok_or_else(|| ModelError::UnknownLabel(l.clone()))
                            })
                            .collect::<Result<Vec<_>, _>>()
                            .map(JointAction)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                actions.sort();
                actions.dedup();
                Feasibility::Explicit(actions)
            }
        };
        build_joint(agents, feasibility, self.discount)
    }

    pub fn from_model(model: &JointModel) -> Self {
        let agents = model
            .agents()
            .iter()
            .map(|a| AgentFile {
                id: a.id(),
                states: a.states().to_vec(),
                actions: a.actions().to_vec(),
                null_action: a.actions()[a.null_action()].clone(),
                transition: a.transitions().to_vec(),
                reward: a.rewards().to_vec(),
            })
            .collect();
        let feasibility = match model.feasibility() {
            Feasibility::All => FeasibilityFile { kind: FeasibilityKind::All, allowed: None },
            Feasibility::SingleActivation => {
                FeasibilityFile { kind: FeasibilityKind::SingleActivation, allowed: None }
            }
            Feasibility::Explicit(actions) => FeasibilityFile {
                kind: FeasibilityKind::Explicit,
                allowed: Some(actions.iter().map(|a| model.action_labels(a)).collect()),
            },
        };
        Self { agents, feasibility, discount: model.discount() }
    }
}
