use std::fmt;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Row-sum tolerance for transition distributions.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Largest joint state space accepted by [`build_joint`].
pub const MAX_JOINT_STATES: usize = 1_000_000;

/// One local state per agent, ordered by agent id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointState(pub Vec<usize>);

impl JointState {
    pub fn new(components: Vec<usize>) -> Self {
        Self(components)
    }

    pub fn components(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy of this state with agent `agent`'s component replaced.
    pub fn with_component(&self, agent: usize, local: usize) -> Self {
        let mut next = self.0.clone();
        next[agent] = local;
        Self(next)
    }
}

impl std::ops::Index<usize> for JointState {
    type Output = usize;

    fn index(&self, agent: usize) -> &usize {
        &self.0[agent]
    }
}

/// One action index per agent. Derived ordering is lexicographic, which is
/// the global tie-break order for greedy policy extraction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointAction(pub Vec<usize>);

impl JointAction {
    pub fn components(&self) -> &[usize] {
        &self.0
    }
}

impl std::ops::Index<usize> for JointAction {
    type Output = usize;

    fn index(&self, agent: usize) -> &usize {
        &self.0[agent]
    }
}

/// A single agent's finite MDP.
///
/// Rewards depend only on the agent's own `(state, action)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    id: usize,
    states: Vec<String>,
    actions: Vec<String>,
    null_action: usize,
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<f64>>,
    // nonzero entries of each transition row, derived
    sparse: Vec<Vec<Vec<(usize, f64)>>>,
}

impl AgentModel {
    /// Validates and builds an agent model. `transition[s][a]` is a
    /// distribution over next states, `reward[s][a]` the nonnegative reward.
    pub fn new(
        id: usize,
        states: Vec<String>,
        actions: Vec<String>,
        null_action: usize,
        transition: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        if states.is_empty() {
            return Err(ModelError::EmptyStates { agent: id });
        }
        if null_action >= actions.len() {
            return Err(ModelError::MissingNullAction { agent: id });
        }
        let ns = states.len();
        let na = actions.len();
        if transition.len() != ns || reward.len() != ns {
            return Err(ModelError::Shape {
                agent: id,
                detail: format!("expected {ns} state rows"),
            });
        }
        for s in 0..ns {
            if transition[s].len() != na || reward[s].len() != na {
                return Err(ModelError::Shape {
                    agent: id,
                    detail: format!("state {s}: expected {na} action entries"),
                });
            }
            for a in 0..na {
                let row = &transition[s][a];
                if row.len() != ns {
                    return Err(ModelError::Shape {
                        agent: id,
                        detail: format!("row ({s}, {a}) has {} entries, expected {ns}", row.len()),
                    });
                }
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(ModelError::BadRow { agent: id, state: s, action: a, sum: f64::NAN });
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(ModelError::BadRow { agent: id, state: s, action: a, sum });
                }
                let r = reward[s][a];
                if !r.is_finite() || r < 0.0 {
                    return Err(ModelError::NegativeReward { agent: id, state: s, action: a, reward: r });
                }
            }
        }
        let sparse = transition
            .iter()
            .map(|per_action| {
                per_action
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(_, p)| **p > 0.0)
                            .map(|(j, p)| (j, *p))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self { id, states, actions, null_action, transition, reward, sparse })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn null_action(&self) -> usize {
        self.null_action
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub fn action_index(&self, label: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == label)
    }

    pub fn transition_row(&self, state: usize, action: usize) -> &[f64] {
        &self.transition[state][action]
    }

    pub fn transitions(&self) -> &[Vec<Vec<f64>>] {
        &self.transition
    }

    pub fn rewards(&self) -> &[Vec<f64>] {
        &self.reward
    }

    /// Nonzero successors of `(state, action)`.
    pub fn successors(&self, state: usize, action: usize) -> &[(usize, f64)] {
        &self.sparse[state][action]
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.reward[state][action]
    }

    /// Copy with every reward multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, ModelError> {
        let reward = self
            .reward
            .iter()
            .map(|row| row.iter().map(|r| r * factor).collect())
            .collect();
        Self::new(
            self.id,
            self.states.clone(),
            self.actions.clone(),
            self.null_action,
            self.transition.clone(),
            reward,
        )
    }

    pub(crate) fn with_id(mut self, id: usize) -> Self {
        self.id = id;
        self
    }
}

/// A Markov chain agent: one `activate` action plus the null action, which
/// freezes the chain and pays nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovChainModel {
    pub id: usize,
    pub states: Vec<String>,
    /// Transition matrix under activation.
    pub transition: Vec<Vec<f64>>,
    /// Reward received when the chain is activated in each state.
    pub reward: Vec<f64>,
}

impl MarkovChainModel {
    pub const ACTIVATE: usize = 0;
    pub const NULL: usize = 1;

    pub fn new(
        id: usize,
        states: Vec<String>,
        transition: Vec<Vec<f64>>,
        reward: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let chain = Self { id, states, transition, reward };
        chain.to_agent_model()?;
        Ok(chain)
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    /// Lifts the chain into a two-action agent model.
    pub fn to_agent_model(&self) -> Result<AgentModel, ModelError> {
        let n = self.states.len();
        if self.transition.len() != n || self.reward.len() != n {
            return Err(ModelError::Shape {
                agent: self.id,
                detail: format!("chain with {n} states needs {n} transition rows and rewards"),
            });
        }
        let transition = (0..n)
            .map(|s| {
                let mut frozen = vec![0.0; n];
                frozen[s] = 1.0;
                vec![self.transition[s].clone(), frozen]
            })
            .collect();
        let reward = self.reward.iter().map(|r| vec![*r, 0.0]).collect();
        AgentModel::new(
            self.id,
            self.states.clone(),
            vec!["activate".to_string(), "null".to_string()],
            Self::NULL,
            transition,
            reward,
        )
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            reward: self.reward.iter().map(|r| r * factor).collect(),
            ..self.clone()
        }
    }
}

/// Which joint actions the planner may choose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    /// Every element of A_1 × … × A_n.
    All,
    /// At most one agent takes a non-null action.
    SingleActivation,
    /// An explicit allow-list; the all-null action must be listed.
    Explicit(Vec<JointAction>),
}

impl Feasibility {
    pub fn allows(&self, agents: &[AgentModel], action: &JointAction) -> bool {
        if action.0.len() != agents.len()
            || action.0.iter().zip(agents).any(|(a, m)| *a >= m.num_actions())
        {
            return false;
        }
        match self {
            Feasibility::All => true,
            Feasibility::SingleActivation => {
                action
                    .0
                    .iter()
                    .zip(agents)
                    .filter(|(a, m)| **a != m.null_action())
                    .count()
                    <= 1
            }
            Feasibility::Explicit(allowed) => allowed.contains(action),
        }
    }
}

/// Composition of independent agent MDPs under a shared feasibility
/// constraint and discount.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    agents: Vec<AgentModel>,
    feasibility: Feasibility,
    discount: f64,
    strides: Vec<usize>,
    num_states: usize,
    actions: Vec<JointAction>,
}

/// Composes agent models into a joint model. Joint transitions factor into
/// the product of the local kernels.
pub fn build_joint(
    agents: Vec<AgentModel>,
    feasibility: Feasibility,
    discount: f64,
) -> Result<JointModel, ModelError> {
    if agents.is_empty() {
        return Err(ModelError::NoAgents);
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(ModelError::Discount(discount));
    }
    for (i, agent) in agents.iter().enumerate() {
        if agent.id() != i {
            return Err(ModelError::AgentId { position: i, id: agent.id() });
        }
    }
    let mut num_states: usize = 1;
    for agent in &agents {
        num_states = num_states
            .checked_mul(agent.num_states())
            .filter(|n| *n <= MAX_JOINT_STATES)
            .ok_or(ModelError::TooLarge)?;
    }
    // agent 0 is the most significant digit, so index order is lexicographic
    let mut strides = vec![1; agents.len()];
    for i in (0..agents.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * agents[i + 1].num_states();
    }

    let null = JointAction(agents.iter().map(|a| a.null_action()).collect());
    if let Feasibility::Explicit(allowed) = &feasibility {
        for a in allowed {
            if a.0.len() != agents.len()
                || a.0.iter().zip(&agents).any(|(x, m)| *x >= m.num_actions())
            {
                return Err(ModelError::BadJointAction(a.0.clone()));
            }
        }
    }
    if !feasibility.allows(&agents, &null) {
        return Err(ModelError::NullInfeasible);
    }

    let mut actions = Vec::new();
    let mut current = vec![0usize; agents.len()];
    loop {
        let candidate = JointAction(current.clone());
        if feasibility.allows(&agents, &candidate) {
            actions.push(candidate);
        }
        // odometer over A_1 × … × A_n, last agent fastest: yields lexicographic order
        let mut i = agents.len();
        loop {
            if i == 0 {
                return Ok(JointModel { agents, feasibility, discount, strides, num_states, actions });
            }
            i -= 1;
            current[i] += 1;
            if current[i] < agents[i].num_actions() {
                break;
            }
            current[i] = 0;
        }
    }
}

impl JointModel {
    pub fn agents(&self) -> &[AgentModel] {
        &self.agents
    }

    pub fn agent(&self, id: usize) -> &AgentModel {
        &self.agents[id]
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn feasibility(&self) -> &Feasibility {
        &self.feasibility
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Feasible joint actions in lexicographic order.
    pub fn actions(&self) -> &[JointAction] {
        &self.actions
    }

    pub fn null_action(&self) -> JointAction {
        JointAction(self.agents.iter().map(|a| a.null_action()).collect())
    }

    pub fn is_feasible(&self, action: &JointAction) -> bool {
        self.feasibility.allows(&self.agents, action)
    }

    pub fn validate_state(&self, state: &JointState) -> Result<(), ModelError> {
        if state.len() != self.agents.len() {
            return Err(ModelError::BadJointState(state.0.clone()));
        }
        for (s, agent) in state.0.iter().zip(&self.agents) {
            if *s >= agent.num_states() {
                return Err(ModelError::BadJointState(state.0.clone()));
            }
        }
        Ok(())
    }

    pub fn state_index(&self, state: &JointState) -> usize {
        state.0.iter().zip(&self.strides).map(|(s, k)| s * k).sum()
    }

    pub fn state_at(&self, index: usize) -> JointState {
        JointState(
            self.strides
                .iter()
                .zip(&self.agents)
                .map(|(k, a)| (index / k) % a.num_states())
                .collect(),
        )
    }

    pub fn states(&self) -> impl Iterator<Item = JointState> + '_ {
        (0..self.num_states).map(|i| self.state_at(i))
    }

    /// Parses a joint state from per-agent labels.
    pub fn state_from_labels<S: AsRef<str>>(&self, labels: &[S]) -> Result<JointState, ModelError> {
        if labels.len() != self.agents.len() {
            return Err(ModelError::UnknownLabel(format!(
                "expected {} state labels, got {}",
                self.agents.len(),
                labels.len()
            )));
        }
        labels
            .iter()
            .zip(&self.agents)
            .map(|(l, a)| {
                a.state_index(l.as_ref())
                    .ok_or_else(|| ModelError::UnknownLabel(l.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(JointState)
    }

    pub fn state_labels(&self, state: &JointState) -> Vec<String> {
        state.0.iter().zip(&self.agents).map(|(s, a)| a.states()[*s].clone()).collect()
    }

    pub fn action_labels(&self, action: &JointAction) -> Vec<String> {
        action.0.iter().zip(&self.agents).map(|(x, a)| a.actions()[*x].clone()).collect()
    }

    /// Per-agent rewards r_i(s_i, a_i).
    pub fn rewards(&self, state: &JointState, action: &JointAction) -> Vec<f64> {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, a)| a.reward(state[i], action[i]))
            .collect()
    }

    pub fn total_reward(&self, state: &JointState, action: &JointAction) -> f64 {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, a)| a.reward(state[i], action[i]))
            .sum()
    }

    /// Calls `f(next_index, probability)` for every joint successor with
    /// positive probability.
    pub fn for_each_successor(
        &self,
        state: &JointState,
        action: &JointAction,
        mut f: impl FnMut(usize, f64),
    ) {
        let rows: Vec<&[(usize, f64)]> = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| a.successors(state[i], action[i]))
            .collect();
        let n = rows.len();
        let mut cursor = vec![0usize; n];
        loop {
            let mut index = 0;
            let mut prob = 1.0;
            for i in 0..n {
                let (next, p) = rows[i][cursor[i]];
                index += next * self.strides[i];
                prob *= p;
            }
            f(index, prob);
            let mut i = n;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                cursor[i] += 1;
                if cursor[i] < rows[i].len() {
                    break;
                }
                cursor[i] = 0;
            }
        }
    }

    pub fn successors(&self, state: &JointState, action: &JointAction) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.for_each_successor(state, action, |j, p| out.push((j, p)));
        out
    }

    /// Copy of the model with all rewards scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<JointModel, ModelError> {
        let agents = self
            .agents
            .iter()
            .map(|a| a.scaled(factor))
            .collect::<Result<Vec<_>, _>>()?;
        build_joint(agents, self.feasibility.clone(), self.discount)
    }

    /// The model with agent `exclude` removed (its ids are compacted). The
    /// feasibility rule is restricted to action profiles where the removed
    /// agent plays its null action.
    pub fn without_agent(&self, exclude: usize) -> Result<JointModel, ModelError> {
        if exclude >= self.agents.len() {
            return Err(ModelError::NoSuchAgent(exclude));
        }
        let agents: Vec<AgentModel> = self
            .agents
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != exclude)
            .map(|(_, a)| a.clone())
            .enumerate()
            .map(|(i, a)| a.with_id(i))
            .collect();
        let feasibility = match &self.feasibility {
            Feasibility::All => Feasibility::All,
            Feasibility::SingleActivation => Feasibility::SingleActivation,
            Feasibility::Explicit(allowed) => {
                let null = self.agents[exclude].null_action();
                Feasibility::Explicit(
                    allowed
                        .iter()
                        .filter(|a| a[exclude] == null)
                        .map(|a| {
                            JointAction(
                                a.0.iter()
                                    .enumerate()
                                    .filter(|(i, _)| *i != exclude)
                                    .map(|(_, x)| *x)
                                    .collect(),
                            )
                        })
                        .collect(),
                )
            }
        };
        build_joint(agents, feasibility, self.discount)
    }
}

impl fmt::Display for JointState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frozen_chain(id: usize, rewards: &[f64]) -> MarkovChainModel {
        let n = rewards.len();
        let transition = (0..n)
            .map(|s| (0..n).map(|j| if j == s { 1.0 } else { 0.0 }).collect())
            .collect();
        MarkovChainModel::new(
            id,
            (0..n).map(|s| format!("s{s}")).collect(),
            transition,
            rewards.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn degenerate_single_agent_model() {
        let agent = AgentModel::new(
            0,
            vec!["only".into()],
            vec!["null".into()],
            0,
            vec![vec![vec![1.0]]],
            vec![vec![1.0]],
        )
        .unwrap();
        let model = build_joint(vec![agent], Feasibility::All, 0.5).unwrap();
        assert_eq!(model.num_states(), 1);
        assert_eq!(model.actions().len(), 1);
    }

    #[test]
    fn single_activation_counts_n_plus_one_actions() {
        let agents = (0..3)
            .map(|i| frozen_chain(i, &[1.0, 2.0]).to_agent_model().unwrap())
            .collect();
        let model = build_joint(agents, Feasibility::SingleActivation, 0.9).unwrap();
        assert_eq!(model.actions().len(), 4);
        assert_eq!(model.num_states(), 8);
        // lexicographic: activating agent 0 comes first, all-null last
        assert_eq!(model.actions()[0], JointAction(vec![0, 1, 1]));
        assert_eq!(model.actions()[3], JointAction(vec![1, 1, 1]));
    }

    #[test]
    fn rejects_malformed_rows() {
        let err = AgentModel::new(
            0,
            vec!["a".into(), "b".into()],
            vec!["go".into(), "null".into()],
            1,
            vec![
                vec![vec![0.5, 0.4], vec![1.0, 0.0]],
                vec![vec![0.0, 1.0], vec![0.0, 1.0]],
            ],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::BadRow { state: 0, action: 0, .. }));
    }

    #[test]
    fn rejects_negative_reward_and_missing_null() {
        let err = AgentModel::new(0, vec!["a".into()], vec!["go".into()], 1, vec![vec![vec![1.0]]], vec![vec![0.0]])
            .unwrap_err();
        assert!(matches!(err, ModelError::MissingNullAction { .. }));
        let err = AgentModel::new(0, vec!["a".into()], vec!["null".into()], 0, vec![vec![vec![1.0]]], vec![vec![-1.0]])
            .unwrap_err();
        assert!(matches!(err, ModelError::NegativeReward { .. }));
    }

    #[test]
    fn rejects_infeasible_null_action() {
        let agents = vec![frozen_chain(0, &[1.0]).to_agent_model().unwrap()];
        let err = build_joint(
            agents,
            Feasibility::Explicit(vec![JointAction(vec![0])]),
            0.9,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::NullInfeasible));
    }

    #[test]
    fn rejects_bad_discount() {
        for g in [0.0, 1.0, -0.1, f64::NAN] {
            let agents = vec![frozen_chain(0, &[1.0]).to_agent_model().unwrap()];
            assert!(matches!(
                build_joint(agents, Feasibility::All, g),
                Err(ModelError::Discount(_))
            ));
        }
    }

    #[test]
    fn rejects_oversized_joint_space() {
        let agents = (0..3)
            .map(|i| frozen_chain(i, &vec![0.0; 101]).to_agent_model().unwrap())
            .collect();
        assert!(matches!(
            build_joint(agents, Feasibility::SingleActivation, 0.9),
            Err(ModelError::TooLarge)
        ));
    }

    #[test]
    fn state_index_round_trips() {
        let agents = vec![
            frozen_chain(0, &[0.0, 0.0, 0.0]).to_agent_model().unwrap(),
            frozen_chain(1, &[0.0, 0.0]).to_agent_model().unwrap(),
        ];
        let model = build_joint(agents, Feasibility::All, 0.9).unwrap();
        for i in 0..model.num_states() {
            assert_eq!(model.state_index(&model.state_at(i)), i);
        }
        assert_eq!(model.state_at(3), JointState(vec![1, 1]));
    }

    #[test]
    fn without_agent_restricts_explicit_feasibility() {
        let agents = vec![
            frozen_chain(0, &[1.0]).to_agent_model().unwrap(),
            frozen_chain(1, &[1.0]).to_agent_model().unwrap(),
        ];
        let model = build_joint(
            agents,
            Feasibility::Explicit(vec![
                JointAction(vec![0, 0]),
                JointAction(vec![1, 0]),
                JointAction(vec![1, 1]),
            ]),
            0.9,
        )
        .unwrap();
        let marginal = model.without_agent(0).unwrap();
        assert_eq!(marginal.num_agents(), 1);
        assert_eq!(marginal.actions(), &[JointAction(vec![0]), JointAction(vec![1])]);
    }
}
