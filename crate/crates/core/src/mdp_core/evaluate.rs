//! Exact policy evaluation.
//!
//! A fixed policy turns the joint model into a Markov reward process whose
//! discounted value solves the linear system `(I − γP) v = r`. Small systems
//! are factored directly; larger ones fall back to Gauss–Seidel sweeps run
//! to machine precision.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use super::model::{JointAction, JointModel, JointState};
use super::solve::Policy;
use super::ModelError;

/// Largest system solved by dense LU factorization.
pub const DENSE_LIMIT: usize = 2500;

/// Solves `v = r + γ P v` for every reward column. `rows[s]` lists the
/// nonzero `(successor, probability)` pairs of state `s`, `rewards[s][k]`
/// is the reward of column `k` in state `s`.
pub fn solve_markov_reward(
    rows: &[Vec<(usize, f64)>],
    rewards: &[Vec<f64>],
    gamma: f64,
) -> Vec<Vec<f64>> {
    let n = rows.len();
    if n == 0 {
        return Vec::new();
    }
    let k = rewards[0].len();
    if n <= DENSE_LIMIT {
        let mut a = DMatrix::<f64>::identity(n, n);
        for (s, row) in rows.iter().enumerate() {
            for &(j, p) in row {
                a[(s, j)] -= gamma * p;
            }
        }
        let b = DMatrix::from_fn(n, k, |s, c| rewards[s][c]);
        if let Some(x) = a.lu().solve(&b) {
            return (0..n).map(|s| (0..k).map(|c| x[(s, c)]).collect()).collect();
        }
    }
    gauss_seidel(rows, rewards, gamma)
}

fn gauss_seidel(rows: &[Vec<(usize, f64)>], rewards: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    let n = rows.len();
    let k = rewards[0].len();
    let mut v = vec![vec![0.0; k]; n];
    loop {
        let mut delta: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for s in 0..n {
            for c in 0..k {
                let mut acc = rewards[s][c];
                for &(j, p) in &rows[s] {
                    acc += gamma * p * v[j][c];
                }
                delta = delta.max((acc - v[s][c]).abs());
                scale = scale.max(acc.abs());
                v[s][c] = acc;
            }
        }
        if delta <= 4.0 * f64::EPSILON * scale {
            return v;
        }
    }
}

/// Exact per-column values of a policy over a set of joint states closed
/// under the policy's transitions.
#[derive(Debug, Clone)]
pub struct PolicyValues {
    slot: Vec<usize>,
    states: Vec<usize>,
    values: Vec<Vec<f64>>,
}

impl PolicyValues {
    /// Joint state indices covered by this evaluation.
    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn covers(&self, index: usize) -> bool {
        self.slot.get(index).is_some_and(|s| *s != usize::MAX)
    }

    /// Column values at a joint state index, if covered.
    pub fn at(&self, index: usize) -> Option<&[f64]> {
        let slot = *self.slot.get(index)?;
        (slot != usize::MAX).then(|| self.values[slot].as_slice())
    }

    pub fn get(&self, model: &JointModel, state: &JointState) -> Option<&[f64]> {
        self.at(model.state_index(state))
    }
}

/// Joint state indices reachable from `start` under `policy`, in BFS order.
pub fn reachable_states(model: &JointModel, policy: &Policy, start: &JointState) -> Vec<usize> {
    let mut seen = vec![false; model.num_states()];
    let first = model.state_index(start);
    seen[first] = true;
    let mut order = vec![first];
    let mut queue = VecDeque::from([first]);
    while let Some(i) = queue.pop_front() {
        let state = model.state_at(i);
        model.for_each_successor(&state, policy.action(i), |j, _| {
            if !seen[j] {
                seen[j] = true;
                order.push(j);
                queue.push_back(j);
            }
        });
    }
    order
}

/// Evaluates arbitrary per-period reward columns under `policy`. When `from`
/// is given only the states reachable from it are solved; otherwise the
/// whole joint space is.
pub fn evaluate_rewards(
    model: &JointModel,
    policy: &Policy,
    from: Option<&JointState>,
    columns: usize,
    reward: impl Fn(&JointState, &JointAction, &mut [f64]),
) -> PolicyValues {
    let states: Vec<usize> = match from {
        Some(s0) => reachable_states(model, policy, s0),
        None => (0..model.num_states()).collect(),
    };
    let mut slot = vec![usize::MAX; model.num_states()];
    for (k, s) in states.iter().enumerate() {
        slot[*s] = k;
    }
    let mut rows = Vec::with_capacity(states.len());
    let mut rhs = Vec::with_capacity(states.len());
    for &s in &states {
        let state = model.state_at(s);
        let action = policy.action(s);
        let mut row = Vec::new();
        model.for_each_successor(&state, action, |j, p| row.push((slot[j], p)));
        rows.push(row);
        let mut r = vec![0.0; columns];
        reward(&state, action, &mut r);
        rhs.push(r);
    }
    let values = solve_markov_reward(&rows, &rhs, model.discount());
    PolicyValues { slot, states, values }
}

/// Per-agent discounted intrinsic value of `policy`; column `i` is agent `i`.
pub fn evaluate_policy(model: &JointModel, policy: &Policy, from: Option<&JointState>) -> PolicyValues {
    let n = model.num_agents();
    evaluate_rewards(model, policy, from, n, |s, a, out| {
        for (i, agent) in model.agents().iter().enumerate() {
            out[i] = agent.reward(s[i], a[i]);
        }
    })
}

/// Expected discounted reward of every agent except `exclude` under
/// `policy` from `s0`, by exact policy evaluation.
pub fn evaluate_policy_subset(
    model: &JointModel,
    policy: &Policy,
    exclude: usize,
    s0: &JointState,
) -> Result<f64, ModelError> {
    if exclude >= model.num_agents() {
        return Err(ModelError::NoSuchAgent(exclude));
    }
    model.validate_state(s0)?;
    let values = evaluate_rewards(model, policy, Some(s0), 1, |s, a, out| {
        out[0] = model
            .agents()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != exclude)
            .map(|(i, agent)| agent.reward(s[i], a[i]))
            .sum();
    });
    Ok(values.get(model, s0).expect("start state is covered")[0])
}

/// Expected discounted system reward of `policy` from `s0`.
pub fn policy_value(model: &JointModel, policy: &Policy, s0: &JointState) -> f64 {
    let values = evaluate_rewards(model, policy, Some(s0), 1, |s, a, out| {
        out[0] = model.total_reward(s, a);
    });
    values.get(model, s0).expect("start state is covered")[0]
}
