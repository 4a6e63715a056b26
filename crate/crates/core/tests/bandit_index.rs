use std::collections::HashMap;

use coordplan::bandit_learning::{index_at_depth, truncated_index, truncation_depth, InfoState, TruncationPolicy, LAPLACE};
use coordplan::gittins::gittins_index;
use coordplan::mdp_core::MarkovChainModel;

fn state(s: u64, f: u64) -> InfoState {
    InfoState::new(s, f, LAPLACE).unwrap()
}

fn mean(root: &InfoState, a: usize, b: usize) -> f64 {
    (root.successes as f64 + root.alpha + a as f64)
        / ((root.successes + root.failures) as f64 + root.alpha + root.beta + (a + b) as f64)
}

/// Value of the root when retiring pays `r` at any non-root node, by memoized
/// recursion over (extra successes, extra failures).
fn continuation(root: &InfoState, gamma: f64, depth: usize, r: f64) -> f64 {
    fn go(root: &InfoState, gamma: f64, depth: usize, r: f64, a: usize, b: usize, memo: &mut HashMap<(usize, usize), f64>) -> f64 {
        if let Some(v) = memo.get(&(a, b)) {
            return *v;
        }
        let p = mean(root, a, b);
        let v = if a + b == depth {
            r.max(p / (1.0 - gamma))
        } else {
            let cont = p + gamma * (p * go(root, gamma, depth, r, a + 1, b, memo) + (1.0 - p) * go(root, gamma, depth, r, a, b + 1, memo));
            if a + b == 0 { cont } else { r.max(cont) }
        };
        memo.insert((a, b), v);
        v
    }
    go(root, gamma, depth, r, 0, 0, &mut HashMap::new())
}

/// Smallest retirement value at which retiring immediately is as good as
/// playing, by bisection, in per-period units.
fn bisection_index(root: &InfoState, gamma: f64, depth: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0 / (1.0 - gamma));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if continuation(root, gamma, depth, mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (1.0 - gamma) * 0.5 * (lo + hi)
}

/// The truncated tree as an explicit chain: interior nodes pay their mean
/// and branch by Bayes' rule, depth-`depth` leaves pay their mean forever.
fn tree_chain(root: &InfoState, depth: usize) -> MarkovChainModel {
    let mut id = HashMap::new();
    let mut nodes = Vec::new();
    for d in 0..=depth {
        for a in 0..=d {
            id.insert((a, d - a), nodes.len());
            nodes.push((a, d - a));
        }
    }
    let k = nodes.len();
    let mut transition = vec![vec![0.0; k]; k];
    let mut reward = vec![0.0; k];
    for (i, &(a, b)) in nodes.iter().enumerate() {
        let p = mean(root, a, b);
        reward[i] = p;
        if a + b == depth {
            transition[i][i] = 1.0;
        } else {
            transition[i][id[&(a + 1, b)]] = p;
            transition[i][id[&(a, b + 1)]] = 1.0 - p;
        }
    }
    let labels = nodes.iter().map(|(a, b)| format!("{a}/{b}")).collect();
    MarkovChainModel::new(0, labels, transition, reward).unwrap()
}

#[test]
fn matches_bisection_oracle() {
    for (s, f) in [(0, 0), (1, 2), (3, 0), (0, 4), (5, 5)] {
        for gamma in [0.5, 0.9] {
            for depth in [1, 5, 20, 40] {
                let st = state(s, f);
                let fast = index_at_depth(&st, gamma, depth);
                let slow = bisection_index(&st, gamma, depth);
                assert!((fast - slow).abs() < 1e-12, "({s},{f}) γ={gamma} H={depth}: {fast} vs {slow}");
            }
        }
    }
}

#[test]
fn matches_restart_index_of_explicit_tree() {
    for (s, f) in [(0, 0), (1, 2), (2, 0)] {
        for gamma in [0.5, 0.9] {
            let depth = 12;
            let st = state(s, f);
            let chain = tree_chain(&st, depth);
            let restart = gittins_index(&chain, 0, gamma, 1e-13).unwrap();
            let fast = index_at_depth(&st, gamma, depth);
            assert!((fast - restart).abs() < 1e-10, "({s},{f}) γ={gamma}: {fast} vs {restart}");
        }
    }
}

#[test]
fn reference_depth() {
    assert_eq!(truncation_depth(1e-6, 1.0, 0.9), 153.0);
    assert_eq!(TruncationPolicy::new(1e-6, 1.0, 0.9).unwrap().depth, 153);
}

#[test]
fn monotone_in_observations() {
    let trunc = TruncationPolicy::new(1e-6, 1.0, 0.9).unwrap();
    for s in 0..6 {
        for f in 0..6 {
            let here = truncated_index(&state(s, f), 0.9, &trunc);
            let up = truncated_index(&state(s + 1, f), 0.9, &trunc);
            let down = truncated_index(&state(s, f + 1), 0.9, &trunc);
            assert!(up >= here && here >= down, "({s},{f}): {up} {here} {down}");
        }
    }
}

#[test]
fn deeper_tree_moves_index_within_epsilon() {
    let (eps, gamma) = (1e-6, 0.9);
    let h = TruncationPolicy::new(eps, 1.0, gamma).unwrap().depth;
    for s in [0, 1, 4, 10] {
        for f in [0, 1, 4, 10] {
            let st = state(s, f);
            let gap = (index_at_depth(&st, gamma, h) - index_at_depth(&st, gamma, h + 50)).abs();
            assert!(gap <= eps * (1.0 - gamma), "({s},{f}): {gap}");
        }
    }
}

#[test]
fn myopic_discount_gives_the_mean() {
    let trunc = TruncationPolicy::new(1e-6, 1.0, 1e-3).unwrap();
    for (s, f) in [(0, 0), (1, 2), (7, 1)] {
        let st = state(s, f);
        assert!((truncated_index(&st, 1e-3, &trunc) - st.mean()).abs() < 1e-3);
    }
}
