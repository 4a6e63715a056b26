use rand::Rng;

use super::model::{JointAction, JointModel, JointState};
use super::ModelError;

/// Samples an index from a dense distribution using one uniform draw.
pub fn sample_index<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (j, p) in row.iter().enumerate() {
        if *p > 0.0 {
            acc += p;
            last = j;
            if u < acc {
                return j;
            }
        }
    }
    last
}

/// Advances the joint state one period under `action`.
///
/// Each agent's successor is drawn independently from its own kernel,
/// consuming exactly one uniform per agent in agent order. Returns the next
/// state and the per-agent rewards `r_i(s_i, a_i)`.
pub fn step<R: Rng + ?Sized>(
    model: &JointModel,
    state: &JointState,
    action: &JointAction,
    rng: &mut R,
) -> Result<(JointState, Vec<f64>), ModelError> {
    if !model.is_feasible(action) {
        return Err(ModelError::Infeasible(action.0.clone()));
    }
    model.validate_state(state)?;
    let rewards = model.rewards(state, action);
    let next = model
        .agents()
        .iter()
        .enumerate()
        .map(|(i, agent)| sample_index(agent.transition_row(state[i], action[i]), rng))
        .collect();
    Ok((JointState(next), rewards))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rng::{stream, StreamLabel};

    #[test]
    fn branching_pair_branch_frequency() {
        let world = fixtures::branching_pair(0.9);
        let act = world.model.actions().iter().find(|a| a.0 == vec![0, 0]).unwrap().clone();
        let mut rng = stream(7, StreamLabel::Real, 0);
        let draws = 10_000;
        let mut to_c = 0;
        for _ in 0..draws {
            let (next, rewards) = step(&world.model, &world.initial, &act, &mut rng).unwrap();
            assert_eq!(rewards, vec![0.5, 0.4]);
            if next[0] == 1 {
                to_c += 1;
            }
        }
        let freq = to_c as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.01, "frequency {freq}");
    }

    #[test]
    fn null_action_freezes_chain_world() {
        let world = fixtures::deceptive_pair();
        let model = &world.model;
        let null = model.null_action();
        let mut rng = stream(1, StreamLabel::Real, 0);
        for s in model.states() {
            let (next, rewards) = step(model, &s, &null, &mut rng).unwrap();
            assert_eq!(next, s);
            assert!(rewards.iter().all(|r| *r == 0.0));
        }
    }

    #[test]
    fn deterministic_chain_ignores_rng() {
        let world = fixtures::deceptive_pair();
        let act = JointAction(vec![1, 0]);
        let s = world.initial.clone();
        let a = step(&world.model, &s, &act, &mut stream(1, StreamLabel::Real, 0)).unwrap();
        let b = step(&world.model, &s, &act, &mut stream(99, StreamLabel::Real, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_infeasible_action() {
        let world = fixtures::deceptive_pair();
        let both = JointAction(vec![0, 0]);
        let err = step(&world.model, &world.initial, &both, &mut stream(1, StreamLabel::Real, 0));
        assert!(matches!(err, Err(ModelError::Infeasible(_))));
    }
}
