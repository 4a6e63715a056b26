//! The learning mechanism: priors are elicited as observation strings,
//! indices are reported online, and each agent's charge is the average
//! system reward of sampled trajectories of the world without it.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mdp_core::MarkovChainModel;
use crate::rng::{stream, SimRng, StreamLabel};
use crate::sim_harness::{PeriodRecord, Strategy, Transcript};

use super::index::{IndexOracle, TruncationPolicy};
use super::info::{parse_prior, InfoState, LAPLACE};
use super::BanditError;

fn laplace() -> (f64, f64) {
    LAPLACE
}

/// One agent's arm: its hidden success probability and the prior the
/// agent holds about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arm {
    pub ground_truth_p: f64,
    #[serde(default)]
    pub prior_string: String,
}

/// A multi-agent Bernoulli bandit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditWorld {
    pub arms: Vec<Arm>,
    pub discount: f64,
    pub epsilon: f64,
    pub r_max: f64,
    /// Beta pseudo-counts added to every prior string.
    #[serde(default = "laplace")]
    pub base: (f64, f64),
    pub m: usize,
    pub horizon: usize,
}

impl BanditWorld {
    pub fn validate(&self) -> Result<TruncationPolicy, BanditError> {
        if self.arms.len() < 2 {
            return Err(BanditError::TooFewArms(self.arms.len()));
        }
        for (arm, a) in self.arms.iter().enumerate() {
            if !(0.0..=1.0).contains(&a.ground_truth_p) {
                return Err(BanditError::GroundTruth { arm, p: a.ground_truth_p });
            }
            parse_prior(&a.prior_string, self.base)?;
        }
        if self.m == 0 {
            return Err(BanditError::NonPositive("m"));
        }
        if self.horizon == 0 {
            return Err(BanditError::NonPositive("horizon"));
        }
        TruncationPolicy::new(self.epsilon, self.r_max, self.discount)
    }

    pub fn oracle(&self) -> Result<IndexOracle, BanditError> {
        let trunc = self.validate()?;
        Ok(IndexOracle::new(self.discount, trunc))
    }
}

/// The planner asking `agent` for the index of `state`, reached on a sample
/// trajectory of the world without `label`'s excluded agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierRequest {
    pub label: StreamLabel,
    pub trajectory: usize,
    pub agent: usize,
    pub state: InfoState,
}

/// Eligible arms of one trajectory, best first: higher index, then lower id.
#[derive(Debug, Clone)]
struct Ranking {
    order: Vec<(usize, f64)>,
}

fn precedes(a: &(usize, f64), b: &(usize, f64)) -> bool {
    a.1 > b.1 || (a.1 == b.1 && a.0 < b.0)
}

impl Ranking {
    fn build(mut entries: Vec<(usize, f64)>, comparisons: &mut u64) -> Self {
        entries.sort_by(|a, b| {
            *comparisons += 1;
            if precedes(a, b) {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        });
        Self { order: entries }
    }

    fn leader(&self) -> usize {
        self.order[0].0
    }

    /// Gives the leader a new index and moves it to its place by galloping
    /// search: probe positions 0, 1, 3, 7, ... until one ranks below the
    /// leader, then bisect the last gap. A small move costs one or two
    /// comparisons and a move past `d` arms about `2·log₂ d`.
    fn update_leader(&mut self, index: f64, comparisons: &mut u64) {
        let (agent, _) = self.order.remove(0);
        let entry = (agent, index);
        let len = self.order.len();
        let before = |pos: usize, comparisons: &mut u64| {
            *comparisons += 1;
            precedes(&self.order[pos], &entry)
        };
        let (mut lo, mut hi) = (0, len);
        let mut step = 1;
        let mut probe = 0;
        while probe < len {
            if before(probe, comparisons) {
                lo = probe + 1;
                probe += step;
                step *= 2;
            } else {
                hi = probe;
                break;
            }
        }
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if before(mid, comparisons) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        self.order.insert(lo, entry);
    }
}

/// A sample trajectory of the marginal world without `excluded`, over the
/// planner's view of the arms (reported priors plus simulated pulls).
#[derive(Debug, Clone)]
struct MarginalPath {
    excluded: usize,
    replica: usize,
    states: Vec<InfoState>,
    ranking: Option<Ranking>,
    log: Vec<f64>,
    rng: SimRng,
}

struct AgentState {
    strategy: Strategy,
    true_prior: InfoState,
    model_prior: InfoState,
    successes: u64,
    failures: u64,
}

impl AgentState {
    fn with_counts(prior: &InfoState, successes: u64, failures: u64) -> InfoState {
        InfoState { successes: prior.successes + successes, failures: prior.failures + failures, ..*prior }
    }

    fn true_state(&self) -> InfoState {
        Self::with_counts(&self.true_prior, self.successes, self.failures)
    }

    fn model_state(&self) -> InfoState {
        Self::with_counts(&self.model_prior, self.successes, self.failures)
    }

    fn report(&self, oracle: &IndexOracle) -> (InfoState, f64) {
        let state = self.model_state();
        let index = oracle.index(&state);
        match self.strategy {
            Strategy::StateIndexInconsistent { boost } => (state, index + boost),
            _ => (state, index),
        }
    }

    fn answer(&self, request: &FrontierRequest, oracle: &IndexOracle) -> f64 {
        let index = oracle.index(&request.state);
        match self.strategy {
            Strategy::FrontierMisreport { bias } => index + bias,
            _ => index,
        }
    }
}

fn check(agent: usize, value: f64) -> Result<f64, BanditError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(BanditError::MalformedResponse { agent, value })
    }
}

/// Runs the learning mechanism for `horizon` periods with `m` marginal
/// trajectories per agent.
///
/// Per period: agents report states and indices; the highest index is
/// pulled against its hidden ground truth (one uniform from the real
/// stream); every marginal trajectory activates its leader, logs the
/// leader's posterior mean, samples the pull from its own stream, and asks
/// the leader's agent for the index of the new state; finally each agent is
/// charged the average logged reward of its own marginal trajectories.
///
/// A trajectory keeps its eligible arms ranked, so only the activated arm
/// is re-placed each period. The recorded comparison count covers the real
/// decision and all ranking work.
pub fn run_learning_mechanism(
    world: &BanditWorld,
    strategies: &[Strategy],
    m: usize,
    horizon: usize,
    seed: u64,
    oracle: &IndexOracle,
) -> Result<Transcript<InfoState>, BanditError> {
    world.validate()?;
    let n = world.arms.len();
    if strategies.len() != n {
        return Err(BanditError::StrategyCount { expected: n, got: strategies.len() });
    }
    if m == 0 {
        return Err(BanditError::NonPositive("m"));
    }
    if horizon == 0 {
        return Err(BanditError::NonPositive("horizon"));
    }
    let mut agents = Vec::with_capacity(n);
    for (i, (arm, strategy)) in world.arms.iter().zip(strategies).enumerate() {
        if !strategy.fits_learning_world() {
            return Err(BanditError::Strategy { agent: i, kind: strategy.kind() });
        }
        let true_prior = parse_prior(&arm.prior_string, world.base)?;
        let reported = match strategy {
            Strategy::ConsistentWrongModel { prior } => prior.as_str(),
            _ => arm.prior_string.as_str(),
        };
        let model_prior = parse_prior(reported, world.base)?;
        agents.push(AgentState { strategy: strategy.clone(), true_prior, model_prior, successes: 0, failures: 0 });
    }
    let priors: Vec<InfoState> = agents.iter().map(|a| a.model_prior).collect();
    let mut paths: Vec<MarginalPath> = (0..n)
        .flat_map(|i| {
            let priors = &priors;
            (0..m).map(move |k| MarginalPath {
                excluded: i,
                replica: k,
                states: priors.clone(),
                ranking: None,
                log: Vec::with_capacity(horizon),
                rng: stream(seed, StreamLabel::Marginal(i), k as u64),
            })
        })
        .collect();
    let mut real = stream(seed, StreamLabel::Real, 0);
    let mut records = Vec::with_capacity(horizon);

    for t in 0..horizon {
        let mut comparisons = 0u64;
        let mut requests = 0usize;
        let true_state: Vec<InfoState> = agents.iter().map(AgentState::true_state).collect();
        let mut reports = Vec::with_capacity(n);
        let mut index_reports = Vec::with_capacity(n);
        for (i, a) in agents.iter().enumerate() {
            let (state, index) = a.report(oracle);
            reports.push(state);
            index_reports.push(check(i, index)?);
        }
        let mut winner = 0;
        for i in 1..n {
            comparisons += 1;
            if index_reports[i] > index_reports[winner] {
                winner = i;
            }
        }

        let u: f64 = real.random();
        let success = u < world.arms[winner].ground_truth_p;
        let mut rewards = vec![0.0; n];
        if success {
            rewards[winner] = 1.0;
            agents[winner].successes += 1;
        } else {
            agents[winner].failures += 1;
        }

        if t == 0 {
            let mut initial = Vec::new();
            for (p, path) in paths.iter().enumerate() {
                for j in (0..n).filter(|j| *j != path.excluded) {
                    initial.push((p, FrontierRequest {
                        label: StreamLabel::Marginal(path.excluded),
                        trajectory: path.replica,
                        agent: j,
                        state: path.states[j],
                    }));
                }
            }
            requests += initial.len();
            let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); paths.len()];
            for (p, req) in &initial {
                let g = check(req.agent, agents[req.agent].answer(req, oracle))?;
                entries[*p].push((req.agent, g));
            }
            for (path, e) in paths.iter_mut().zip(entries) {
                path.ranking = Some(Ranking::build(e, &mut comparisons));
            }
        }

        let mut frontier = Vec::with_capacity(paths.len());
        for (p, path) in paths.iter_mut().enumerate() {
            let ranking = path.ranking.as_ref().expect("rankings are built in period 0");
            let j = ranking.leader();
            let state = path.states[j];
            path.log.push(state.mean());
            let u: f64 = path.rng.random();
            let next = state.after(u < state.mean());
            path.states[j] = next;
            frontier.push((p, FrontierRequest {
                label: StreamLabel::Marginal(path.excluded),
                trajectory: path.replica,
                agent: j,
                state: next,
            }));
        }
        requests += frontier.len();
        for (p, req) in &frontier {
            let g = check(req.agent, agents[req.agent].answer(req, oracle))?;
            paths[*p]
                .ranking
                .as_mut()
                .expect("rankings are built in period 0")
                .update_leader(g, &mut comparisons);
        }

        let charges: Vec<f64> = (0..n)
            .map(|i| {
                let logs = &paths[i * m..(i + 1) * m];
                logs.iter().map(|x| x.log[t]).sum::<f64>() / m as f64
            })
            .collect();
        let paid = reports[winner].mean();
        let transfers = charges
            .iter()
            .enumerate()
            .map(|(j, c)| if j == winner { -c } else { paid - c })
            .collect();
        let mut action = vec![MarkovChainModel::NULL; n];
        action[winner] = MarkovChainModel::ACTIVATE;
        records.push(PeriodRecord {
            t,
            true_state,
            reports,
            action,
            activated: Some(winner),
            rewards,
            transfers,
            charges,
            index_reports,
            sample_rewards: paths.iter().map(|x| x.log[t]).collect(),
            frontier_requests: requests,
            comparisons,
        });
    }
    Ok(Transcript {
        mechanism: "learning".into(),
        seed,
        scenario_hash: String::new(),
        discount: world.discount,
        agents: n,
        records,
    })
}

/// A planner that knows every agent's true prior and observations and
/// computes all indices itself. Returns the activated arm per period.
pub fn run_centralized(
    world: &BanditWorld,
    horizon: usize,
    seed: u64,
    oracle: &IndexOracle,
) -> Result<Vec<usize>, BanditError> {
    world.validate()?;
    let mut states = world
        .arms
        .iter()
        .map(|a| parse_prior(&a.prior_string, world.base))
        .collect::<Result<Vec<_>, _>>()?;
    let mut real = stream(seed, StreamLabel::Real, 0);
    let mut activations = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let indices: Vec<f64> = states.iter().map(|s| oracle.index(s)).collect();
        let mut winner = 0;
        for i in 1..indices.len() {
            if indices[i] > indices[winner] {
                winner = i;
            }
        }
        let u: f64 = real.random();
        let success = u < world.arms[winner].ground_truth_p;
        states[winner] = states[winner].after(success);
        activations.push(winner);
    }
    Ok(activations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn truthful(n: usize) -> Vec<Strategy> {
        vec![Strategy::Truthful; n]
    }

    #[test]
    fn identical_arms_start_with_agent_zero() {
        let world = BanditWorld {
            arms: vec![Arm { ground_truth_p: 0.5, prior_string: "01".into() }; 3],
            discount: 0.9,
            epsilon: 1e-6,
            r_max: 1.0,
            base: LAPLACE,
            m: 2,
            horizon: 5,
        };
        let oracle = world.oracle().unwrap();
        for seed in 0..5 {
            let tr = run_learning_mechanism(&world, &truthful(3), 2, 5, seed, &oracle).unwrap();
            assert_eq!(tr.records[0].activated, Some(0));
        }
    }

    #[test]
    fn truthful_run_matches_centralized_planner() {
        let world = fixtures::two_arm_bandit();
        let oracle = world.oracle().unwrap();
        for seed in 0..5 {
            let tr = run_learning_mechanism(&world, &truthful(2), world.m, 60, seed, &oracle).unwrap();
            let central = run_centralized(&world, 60, seed, &oracle).unwrap();
            let mech: Vec<usize> = tr.activations().into_iter().map(|a| a.unwrap()).collect();
            assert_eq!(mech, central);
        }
    }

    #[test]
    fn one_arm_moves_per_period() {
        let world = fixtures::two_arm_bandit();
        let oracle = world.oracle().unwrap();
        let tr = run_learning_mechanism(&world, &truthful(2), 3, 40, 7, &oracle).unwrap();
        for pair in tr.records.windows(2) {
            let a = pair[0].activated.unwrap();
            for i in 0..2 {
                let (before, after) = (pair[0].true_state[i], pair[1].true_state[i]);
                let pulls = |s: InfoState| s.successes + s.failures;
                if i == a {
                    assert_eq!(pulls(after), pulls(before) + 1);
                } else {
                    assert_eq!(after, before);
                }
            }
        }
    }

    #[test]
    fn frontier_requests_are_counted() {
        let world = fixtures::two_arm_bandit();
        let oracle = world.oracle().unwrap();
        let m = 3;
        let tr = run_learning_mechanism(&world, &truthful(2), m, 4, 1, &oracle).unwrap();
        // period 0: one initial request per eligible arm per path, then one
        // frontier request per path; later periods only the latter
        assert_eq!(tr.records[0].frontier_requests, 2 * m + 2 * m);
        assert_eq!(tr.records[1].frontier_requests, 2 * m);
    }

    #[test]
    fn frontier_bias_leaves_own_charges_alone() {
        let world = fixtures::two_arm_bandit();
        let oracle = world.oracle().unwrap();
        let base = run_learning_mechanism(&world, &truthful(2), 4, 50, 3, &oracle).unwrap();
        let biased = vec![Strategy::Truthful, Strategy::FrontierMisreport { bias: 0.7 }];
        let tr = run_learning_mechanism(&world, &biased, 4, 50, 3, &oracle).unwrap();
        assert_eq!(tr.charge_streams(), base.charge_streams());
        assert_eq!(tr.activations(), base.activations());
    }

    #[test]
    fn rejects_inapplicable_strategies() {
        let world = fixtures::two_arm_bandit();
        let oracle = world.oracle().unwrap();
        let s = vec![Strategy::Truthful, Strategy::FixedMisreport { map: vec![0] }];
        assert!(matches!(
            run_learning_mechanism(&world, &s, 2, 5, 0, &oracle),
            Err(BanditError::Strategy { agent: 1, .. })
        ));
        let s = vec![Strategy::Truthful, Strategy::FrontierMisreport { bias: f64::NAN }];
        assert!(run_learning_mechanism(&world, &s, 2, 5, 0, &oracle).is_err());
    }

    #[test]
    fn ranking_counts_comparisons() {
        let mut count = 0;
        let mut r = Ranking::build(vec![(0, 0.5), (1, 0.7), (2, 0.6)], &mut count);
        assert_eq!(r.leader(), 1);
        let built = count;
        r.update_leader(0.55, &mut count);
        // passes agent 2 (0.6), stops at agent 0 (0.5)
        assert_eq!(count - built, 2);
        assert_eq!(r.order.iter().map(|e| e.0).collect::<Vec<_>>(), vec![2, 1, 0]);
        r.update_leader(0.55, &mut count);
        // tie with agent 1: lower id first
        assert_eq!(r.order.iter().map(|e| e.0).collect::<Vec<_>>(), vec![1, 2, 0]);
    }
}
