use super::model::{JointAction, JointModel, JointState};
use super::ModelError;

/// Default sup-norm Bellman residual for [`value_iterate`].
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Relative slack under which two Q-values count as tied.
const TIE_SLACK: f64 = 1e-12;

/// Iteration guard; a contraction with γ < 1 converges long before this.
const MAX_SWEEPS: usize = 10_000_000;

/// Values indexed by joint state index.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn get(&self, model: &JointModel, state: &JointState) -> f64 {
        self.values[model.state_index(state)]
    }
}

/// A stationary joint policy: one feasible joint action per joint state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    actions: Vec<JointAction>,
}

impl Policy {
    /// Builds a policy from `f(state)`, rejecting infeasible assignments.
    pub fn from_fn(
        model: &JointModel,
        mut f: impl FnMut(&JointState) -> JointAction,
    ) -> Result<Self, ModelError> {
        let actions = model
            .states()
            .map(|s| {
                let a = f(&s);
                if model.is_feasible(&a) {
                    Ok(a)
                } else {
                    Err(ModelError::Infeasible(a.0))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { actions })
    }

    pub fn action(&self, index: usize) -> &JointAction {
        &self.actions[index]
    }

    pub fn get(&self, model: &JointModel, state: &JointState) -> &JointAction {
        &self.actions[model.state_index(state)]
    }

    pub fn actions(&self) -> &[JointAction] {
        &self.actions
    }
}

fn q_value(model: &JointModel, v: &[f64], state: &JointState, action: &JointAction) -> f64 {
    let mut expected = 0.0;
    model.for_each_successor(state, action, |j, p| expected += p * v[j]);
    model.total_reward(state, action) + model.discount() * expected
}

fn bellman_backup(model: &JointModel, v: &[f64]) -> Vec<f64> {
    (0..model.num_states())
        .map(|i| {
            let state = model.state_at(i);
            model
                .actions()
                .iter()
                .map(|a| q_value(model, v, &state, a))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// Sup-norm of `T(v) - v` for the Bellman optimality operator `T`.
pub fn bellman_residual(model: &JointModel, v: &ValueFunction) -> f64 {
    bellman_backup(model, &v.values)
        .iter()
        .zip(&v.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Value iteration on the joint model. The returned `V` satisfies
/// `‖T(V) − V‖∞ ≤ tol`.
pub fn value_iterate(model: &JointModel, tol: f64) -> Result<ValueFunction, ModelError> {
    if !(tol > 0.0) {
        return Err(ModelError::Tolerance(tol));
    }
    let mut v = vec![0.0; model.num_states()];
    for _ in 0..MAX_SWEEPS {
        let next = bellman_backup(model, &v);
        let delta = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        // residual of the new iterate is at most γ·delta
        if delta <= tol {
            return Ok(ValueFunction { values: v });
        }
    }
    Err(ModelError::NoConvergence)
}

/// Greedy policy with respect to `v`. Ties go to the lexicographically
/// smallest feasible joint action.
pub fn extract_policy(model: &JointModel, v: &ValueFunction) -> Policy {
    let actions = (0..model.num_states())
        .map(|i| {
            let state = model.state_at(i);
            let mut best: Option<(f64, &JointAction)> = None;
            for a in model.actions() {
                let q = q_value(model, &v.values, &state, a);
                match best {
                    Some((b, _)) if q <= b + TIE_SLACK * b.abs().max(1.0) => {}
                    _ => best = Some((q, a)),
                }
            }
            best.expect("at least the null action is feasible").1.clone()
        })
        .collect();
    Policy { actions }
}

/// Value iteration followed by greedy extraction.
pub fn solve(model: &JointModel, tol: f64) -> Result<(ValueFunction, Policy), ModelError> {
    let v = value_iterate(model, tol)?;
    let policy = extract_policy(model, &v);
    Ok((v, policy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::mdp_core::{build_joint, AgentModel, Feasibility, MarkovChainModel};

    #[test]
    fn one_state_geometric_series() {
        let agent = AgentModel::new(
            0,
            vec!["x".into()],
            vec!["go".into(), "null".into()],
            1,
            vec![vec![vec![1.0], vec![1.0]]],
            vec![vec![1.0, 0.0]],
        )
        .unwrap();
        let model = build_joint(vec![agent], Feasibility::All, 0.5).unwrap();
        let v = value_iterate(&model, 1e-12).unwrap();
        assert!((v.at(0) - 2.0).abs() < 1e-11);
    }

    #[test]
    fn branching_pair_values() {
        let world = fixtures::branching_pair(0.9);
        let v = value_iterate(&world.model, DEFAULT_TOLERANCE).unwrap();
        let be = world.model.state_from_labels(&["B", "E"]).unwrap();
        let ce = world.model.state_from_labels(&["C", "E"]).unwrap();
        // tolerance γ/(1-γ)·tol
        assert!((v.get(&world.model, &be) - 9.0).abs() < 1e-8);
        assert!((v.get(&world.model, &ce) - 4.0).abs() < 1e-8);
        assert!(bellman_residual(&world.model, &v) <= DEFAULT_TOLERANCE);
    }

    #[test]
    fn branching_pair_policy_acts_with_both_agents() {
        let world = fixtures::branching_pair(0.9);
        let (_, policy) = solve(&world.model, DEFAULT_TOLERANCE).unwrap();
        let be = world.model.state_from_labels(&["B", "E"]).unwrap();
        let act = policy.get(&world.model, &be);
        assert_eq!(world.model.action_labels(act), vec!["a1", "a2"]);
    }

    #[test]
    fn dominant_arm_is_always_chosen() {
        let chain = |id, r: f64| {
            MarkovChainModel::new(id, vec!["s".into()], vec![vec![1.0]], vec![r])
                .unwrap()
                .to_agent_model()
                .unwrap()
        };
        let model = build_joint(vec![chain(0, 1.0), chain(1, 2.0)], Feasibility::SingleActivation, 0.9).unwrap();
        let (_, policy) = solve(&model, 1e-12).unwrap();
        for a in policy.actions() {
            assert_eq!(a, &JointAction(vec![1, 0]));
        }
    }

    #[test]
    fn single_feasible_action_everywhere() {
        let agent = AgentModel::new(
            0,
            vec!["x".into(), "y".into()],
            vec!["null".into()],
            0,
            vec![vec![vec![0.5, 0.5]], vec![vec![0.0, 1.0]]],
            vec![vec![0.3], vec![0.1]],
        )
        .unwrap();
        let model = build_joint(vec![agent], Feasibility::All, 0.7).unwrap();
        let (_, policy) = solve(&model, 1e-12).unwrap();
        assert!(policy.actions().iter().all(|a| a == &JointAction(vec![0])));
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        let world = fixtures::branching_pair(0.9);
        assert!(matches!(value_iterate(&world.model, 0.0), Err(ModelError::Tolerance(_))));
    }
}
