//! Worlds shared by tests, checks, and the shipped scenario files.

use rand::Rng;
use rand_distr::Exp1;

use crate::bandit_learning::{Arm, BanditWorld};
use crate::gittins::ChainWorld;
use crate::mdp_core::{
    build_joint, AgentModel, Feasibility, JointAction, JointState, MarkovChainModel, MdpWorld,
};

fn labels(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn chain(id: usize, states: &[&str], transition: Vec<Vec<f64>>, reward: Vec<f64>) -> AgentModel {
    MarkovChainModel::new(id, labels(states), transition, reward)
        .and_then(|c| c.to_agent_model())
        .expect("fixture chain is valid")
}

/// The two-agent episodic example. Agent 0 acts in B for 0.5 and moves to C
/// (absorbing, 0) or D (absorbing, 1) with equal probability; agent 1 sits
/// in E earning 0.4 per period. F and G are unreachable padding states.
pub fn branching_pair(discount: f64) -> MdpWorld {
    let a0 = AgentModel::new(
        0,
        labels(&["B", "C", "D"]),
        labels(&["a1", "null"]),
        1,
        vec![
            vec![vec![0.0, 0.5, 0.5], vec![1.0, 0.0, 0.0]],
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0]],
            vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]],
        ],
        vec![vec![0.5, 0.0], vec![0.0, 0.0], vec![1.0, 0.0]],
    )
    .expect("fixture agent is valid");
    let a1 = AgentModel::new(
        1,
        labels(&["E", "F", "G"]),
        labels(&["a2", "null"]),
        1,
        vec![
            vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]],
            vec![vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0]],
            vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]],
        ],
        vec![vec![0.4, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]],
    )
    .expect("fixture agent is valid");
    let model = build_joint(vec![a0, a1], Feasibility::All, discount).expect("branching_pair is valid");
    MdpWorld::new(model, JointState(vec![0, 0])).expect("initial state is valid")
}

/// Chain A pays 0.5 forever; chain B pays 1 once and then nothing.
/// Single activation, γ = 0.5, both chains fresh.
pub fn deceptive_pair() -> MdpWorld {
    let a = chain(0, &["a"], vec![vec![1.0]], vec![0.5]);
    let b = chain(1, &["s1", "s2"], vec![vec![0.0, 1.0], vec![0.0, 1.0]], vec![1.0, 0.0]);
    let model = build_joint(vec![a, b], Feasibility::SingleActivation, 0.5).expect("valid");
    MdpWorld::new(model, JointState(vec![0, 0])).expect("valid")
}

/// One single-state chain per entry of `rewards`, single activation.
pub fn constant_chains(rewards: &[f64], discount: f64) -> MdpWorld {
    let agents = rewards
        .iter()
        .enumerate()
        .map(|(i, r)| chain(i, &["s"], vec![vec![1.0]], vec![*r]))
        .collect();
    let model = build_joint(agents, Feasibility::SingleActivation, discount).expect("valid");
    let initial = JointState(vec![0; rewards.len()]);
    MdpWorld::new(model, initial).expect("valid")
}

/// Two agents, two frozen states each, single activation, γ = 0.9.
/// Agent 0 sits in `low` (0.2 per activation) but could claim `high` (1.0);
/// agent 1 earns 0.5 in either state. The optimal planner serves agent 1, so
/// a mechanism that does not align agent 0 with welfare invites the claim.
pub fn misreport_bait() -> MdpWorld {
    let frozen = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let a0 = chain(0, &["low", "high"], frozen.clone(), vec![0.2, 1.0]);
    let a1 = chain(1, &["x", "y"], frozen, vec![0.5, 0.5]);
    let model = build_joint(vec![a0, a1], Feasibility::SingleActivation, 0.9).expect("valid");
    MdpWorld::new(model, JointState(vec![0, 0])).expect("valid")
}

/// A Dirichlet(1, …, 1) distribution over `k` outcomes.
pub fn dirichlet_row<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    let mut row: Vec<f64> = draws.iter().map(|x| x / total).collect();
    // absorb rounding so the row sums to one
    let rest: f64 = row[..k - 1].iter().sum();
    row[k - 1] = (1.0 - rest).max(0.0);
    row
}

/// A random agent MDP with `states` states and `actions` actions. The last
/// action is the null action, which freezes the state and pays nothing.
pub fn random_agent<R: Rng + ?Sized>(id: usize, states: usize, actions: usize, rng: &mut R) -> AgentModel {
    let null = actions - 1;
    let mut transition = Vec::with_capacity(states);
    let mut reward = Vec::with_capacity(states);
    for s in 0..states {
        let mut rows = Vec::with_capacity(actions);
        let mut rs = Vec::with_capacity(actions);
        for a in 0..actions {
            if a == null {
                let mut frozen = vec![0.0; states];
                frozen[s] = 1.0;
                rows.push(frozen);
                rs.push(0.0);
            } else {
                rows.push(dirichlet_row(states, rng));
                rs.push(rng.random::<f64>());
            }
        }
        transition.push(rows);
        reward.push(rs);
    }
    let states = (0..states).map(|s| format!("s{s}")).collect();
    let mut names: Vec<String> = (0..null).map(|a| format!("a{a}")).collect();
    names.push("null".into());
    AgentModel::new(id, states, names, null, transition, reward).expect("generated agent is valid")
}

/// A random joint MDP: 1–3 agents, 1–4 states and 2–3 actions each, uniform
/// rewards in [0, 1], Dirichlet(1) rows, and a random feasibility rule
/// (everything, single activation, or a random subset containing all-null).
pub fn random_world<R: Rng + ?Sized>(rng: &mut R) -> MdpWorld {
    let n = rng.random_range(1..=3);
    let agents: Vec<AgentModel> = (0..n)
        .map(|i| {
            let states = rng.random_range(1..=4);
            let actions = rng.random_range(2..=3);
            random_agent(i, states, actions, rng)
        })
        .collect();
    let discount = rng.random_range(0.5..0.95);
    let feasibility = match rng.random_range(0..3) {
        0 => Feasibility::All,
        1 => Feasibility::SingleActivation,
        _ => {
            let all = build_joint(agents.clone(), Feasibility::All, discount).expect("valid");
            let null = all.null_action();
            let allowed: Vec<JointAction> = all
                .actions()
                .iter()
                .filter(|a| **a == null || rng.random_bool(0.5))
                .cloned()
                .collect();
            Feasibility::Explicit(allowed)
        }
    };
    let model = build_joint(agents, feasibility, discount).expect("generated model is valid");
    let initial = JointState(
        model
            .agents()
            .iter()
            .map(|a| rng.random_range(0..a.num_states()))
            .collect(),
    );
    MdpWorld::new(model, initial).expect("valid")
}

/// The deceptive pair as a chain world.
pub fn deceptive_pair_chains() -> ChainWorld {
    let a = MarkovChainModel::new(0, labels(&["a"]), vec![vec![1.0]], vec![0.5]).expect("valid");
    let b = MarkovChainModel::new(1, labels(&["s1", "s2"]), vec![vec![0.0, 1.0], vec![0.0, 1.0]], vec![1.0, 0.0])
        .expect("valid");
    ChainWorld::new(vec![a, b], vec![0, 0], 0.5).expect("valid")
}

/// Single-state chains with constant rewards.
pub fn constant_chain_world(rewards: &[f64], discount: f64) -> ChainWorld {
    let chains = rewards
        .iter()
        .enumerate()
        .map(|(i, r)| MarkovChainModel::new(i, labels(&["s"]), vec![vec![1.0]], vec![*r]).expect("valid"))
        .collect();
    ChainWorld::new(chains, vec![0; rewards.len()], discount).expect("valid")
}

/// A random chain with `states` states, Dirichlet(1) rows, and uniform
/// rewards in [0, 1].
pub fn random_chain<R: Rng + ?Sized>(id: usize, states: usize, rng: &mut R) -> MarkovChainModel {
    let transition = (0..states).map(|_| dirichlet_row(states, rng)).collect();
    let reward = (0..states).map(|_| rng.random::<f64>()).collect();
    let states = (0..states).map(|s| format!("s{s}")).collect();
    MarkovChainModel::new(id, states, transition, reward).expect("generated chain is valid")
}

/// `count` random chains with 1–`max_states` states each and a random
/// initial state.
pub fn random_chain_world<R: Rng + ?Sized>(count: usize, max_states: usize, discount: f64, rng: &mut R) -> ChainWorld {
    let chains: Vec<MarkovChainModel> = (0..count)
        .map(|i| {
            let k = rng.random_range(1..=max_states);
            random_chain(i, k, rng)
        })
        .collect();
    let initial = chains.iter().map(|c| rng.random_range(0..c.num_states())).collect();
    ChainWorld::new(chains, initial, discount).expect("valid")
}

/// Two agents with arms of hidden success rates 0.9 and 0.1 and empty
/// priors; γ = 0.9, ε = 1e-6, R_max = 1, m = 16, horizon 200.
pub fn two_arm_bandit() -> BanditWorld {
    BanditWorld {
        arms: vec![
            Arm { ground_truth_p: 0.9, prior_string: String::new() },
            Arm { ground_truth_p: 0.1, prior_string: String::new() },
        ],
        discount: 0.9,
        epsilon: 1e-6,
        r_max: 1.0,
        base: crate::bandit_learning::LAPLACE,
        m: 16,
        horizon: 200,
    }
}
