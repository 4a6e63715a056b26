//! The episode engine.

use crate::bandit_learning::{run_learning_mechanism, BanditWorld, IndexOracle, InfoState};
use crate::gittins::{
    advance_samples, compute_tables, dgv_charges, reported_tables, sample_charge, ChainWorld,
    GittinsTable, SampleTrajectory, INDEX_TOLERANCE,
};
use crate::mdp_core::{sample_index, step, JointState, MarkovChainModel, MdpWorld};
use crate::mechanisms::{
    precompute_vcg_charges, Groves, Planner, ReportLinkedCharge, TransferRule, Vcg, WithheldPayments,
};
use crate::rng::{stream, SimRng, StreamLabel};

use super::metrics::EpisodeMetrics;
use super::scenario::{MechanismKind, Scenario, World};
use super::strategy::Strategy;
use super::transcript::{PeriodRecord, Transcript};
use super::HarnessError;

/// Shortest horizon whose discounted tail `γ^T·R_max·n/(1−γ)` is below
/// 1e-8 of the payoff scale `R_max·n/(1−γ)`.
pub fn default_horizon(discount: f64) -> usize {
    ((1e-8f64).ln() / discount.ln()).ceil().max(1.0) as usize
}

/// A transcript of any world kind.
#[derive(Debug, Clone, PartialEq)]
pub enum EpisodeTranscript {
    Discrete(Transcript<usize>),
    Learning(Transcript<InfoState>),
}

impl EpisodeTranscript {
    pub fn metrics(&self) -> EpisodeMetrics {
        match self {
            EpisodeTranscript::Discrete(t) => EpisodeMetrics::from_transcript(t),
            EpisodeTranscript::Learning(t) => EpisodeMetrics::from_transcript(t),
        }
    }

    pub fn to_csv(&self) -> String {
        match self {
            EpisodeTranscript::Discrete(t) => t.to_csv(),
            EpisodeTranscript::Learning(t) => t.to_csv(),
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            EpisodeTranscript::Discrete(t) => serde_json::to_string_pretty(t),
            EpisodeTranscript::Learning(t) => serde_json::to_string_pretty(t),
        }
        .expect("transcript serializes")
    }

    pub fn len(&self) -> usize {
        match self {
            EpisodeTranscript::Discrete(t) => t.records.len(),
            EpisodeTranscript::Learning(t) => t.records.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn charge_streams(&self) -> Vec<Vec<f64>> {
        match self {
            EpisodeTranscript::Discrete(t) => t.charge_streams(),
            EpisodeTranscript::Learning(t) => t.charge_streams(),
        }
    }

    pub fn activations(&self) -> Vec<Option<usize>> {
        match self {
            EpisodeTranscript::Discrete(t) => t.activations(),
            EpisodeTranscript::Learning(t) => t.activations(),
        }
    }

    pub fn comparisons(&self) -> Vec<u64> {
        match self {
            EpisodeTranscript::Discrete(t) => t.records.iter().map(|r| r.comparisons).collect(),
            EpisodeTranscript::Learning(t) => t.records.iter().map(|r| r.comparisons).collect(),
        }
    }

    pub fn discrete(&self) -> Option<&Transcript<usize>> {
        match self {
            EpisodeTranscript::Discrete(t) => Some(t),
            EpisodeTranscript::Learning(_) => None,
        }
    }

    pub fn learning(&self) -> Option<&Transcript<InfoState>> {
        match self {
            EpisodeTranscript::Learning(t) => Some(t),
            EpisodeTranscript::Discrete(_) => None,
        }
    }

    fn set_hash(&mut self, hash: &str) {
        match self {
            EpisodeTranscript::Discrete(t) => t.scenario_hash = hash.to_string(),
            EpisodeTranscript::Learning(t) => t.scenario_hash = hash.to_string(),
        }
    }
}

enum Engine {
    Mdp {
        world: MdpWorld,
        planner: Planner,
        rule: Box<dyn TransferRule + Send>,
    },
    Chains {
        world: ChainWorld,
        tables: Vec<GittinsTable>,
        distributed: bool,
        m: usize,
    },
    Learning {
        world: BanditWorld,
        oracle: IndexOracle,
        m: usize,
    },
}

/// A scenario with everything that does not depend on the seed computed
/// once: the planner's policy and charges, index tables, or index cache.
pub struct Prepared {
    scenario: Scenario,
    hash: String,
    engine: Engine,
}

fn mdp_engine(world: MdpWorld, kind: MechanismKind) -> Result<Engine, HarnessError> {
    let planner = Planner::solve(&world.model)?;
    let rule: Box<dyn TransferRule + Send> = match kind {
        MechanismKind::Groves => Box::new(Groves),
        MechanismKind::Vcg => Box::new(Vcg {
            schedule: precompute_vcg_charges(&world.model, &planner.policy, &world.initial)?,
        }),
        MechanismKind::Withheld => Box::new(WithheldPayments),
        MechanismKind::ReportCharged => Box::new(ReportLinkedCharge::new(&world.model, &planner.policy)),
        other => unreachable!("{other} is not a joint-model mechanism"),
    };
    Ok(Engine::Mdp { world, planner, rule })
}

impl Prepared {
    pub fn new(scenario: &Scenario) -> Result<Self, HarnessError> {
        use MechanismKind::*;
        let mismatch = || HarnessError::Mismatch { mechanism: scenario.mechanism.name(), world: scenario.world.kind() };
        let m = scenario.trajectories();
        if m == 0 {
            return Err(HarnessError::Parse("m must be at least 1".into()));
        }
        let engine = match (&scenario.world, scenario.mechanism) {
            (World::Mdp(w), Groves | Vcg | Withheld | ReportCharged) => mdp_engine(w.clone(), scenario.mechanism)?,
            (World::Chains(w), Groves | Vcg | Withheld | ReportCharged) => mdp_engine(w.joint()?, scenario.mechanism)?,
            (World::Chains(w), Sgv | Dgv) => Engine::Chains {
                world: w.clone(),
                tables: compute_tables(w, INDEX_TOLERANCE)?,
                distributed: scenario.mechanism == Dgv,
                m,
            },
            (World::Bandit(w), Learning) => Engine::Learning { world: w.clone(), oracle: w.oracle()?, m },
            _ => return Err(mismatch()),
        };
        Ok(Self { scenario: scenario.clone(), hash: scenario.hash(), engine })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn num_agents(&self) -> usize {
        self.scenario.world.num_agents()
    }

    /// The scenario's horizon, or the default for its world.
    pub fn horizon(&self) -> usize {
        match (self.scenario.horizon, &self.scenario.world) {
            (Some(h), _) => h,
            (None, World::Bandit(b)) => b.horizon,
            (None, w) => default_horizon(w.discount()),
        }
    }

    /// The planner's solution, for joint-model mechanisms.
    pub fn planner(&self) -> Option<(&MdpWorld, &Planner, &dyn TransferRule)> {
        match &self.engine {
            Engine::Mdp { world, planner, rule } => Some((world, planner, rule.as_ref())),
            _ => None,
        }
    }

    /// True index tables, for chain mechanisms.
    pub fn tables(&self) -> Option<&[GittinsTable]> {
        match &self.engine {
            Engine::Chains { tables, .. } => Some(tables),
            _ => None,
        }
    }

    /// Runs one episode with the scenario's own strategies and horizon.
    pub fn run_default(&self, seed: u64) -> Result<EpisodeTranscript, HarnessError> {
        self.run(&self.scenario.strategies, self.horizon(), seed)
    }

    pub fn run(&self, strategies: &[Strategy], horizon: usize, seed: u64) -> Result<EpisodeTranscript, HarnessError> {
        if horizon == 0 {
            return Err(HarnessError::Horizon);
        }
        let n = self.num_agents();
        if strategies.len() != n {
            return Err(HarnessError::StrategyCount { expected: n, got: strategies.len() });
        }
        let name = self.scenario.mechanism.name();
        let mut out = match &self.engine {
            Engine::Mdp { world, planner, rule } => {
                EpisodeTranscript::Discrete(run_mdp(world, planner, rule.as_ref(), name, strategies, horizon, seed)?)
            }
            Engine::Chains { world, tables, distributed, m } => {
                EpisodeTranscript::Discrete(run_chains(world, tables, *distributed, *m, name, strategies, horizon, seed)?)
            }
            Engine::Learning { world, oracle, m } => {
                EpisodeTranscript::Learning(run_learning_mechanism(world, strategies, *m, horizon, seed, oracle)?)
            }
        };
        out.set_hash(&self.hash);
        Ok(out)
    }
}

fn strategy_streams(n: usize, seed: u64) -> Vec<SimRng> {
    (0..n).map(|i| stream(seed, StreamLabel::Strategy(i), 0)).collect()
}

fn check_state_strategies(states: &[usize], strategies: &[Strategy], tables: bool) -> Result<(), HarnessError> {
    for (agent, (k, s)) in states.iter().zip(strategies).enumerate() {
        if !s.fits_state_world(*k, tables) {
            return Err(HarnessError::Strategy {
                agent,
                detail: format!("strategy `{}` does not fit a world where it has {k} states", s.kind()),
            });
        }
    }
    Ok(())
}

fn collect_reports(
    truth: &[usize],
    sizes: &[usize],
    strategies: &[Strategy],
    rngs: &mut [SimRng],
) -> Result<Vec<usize>, HarnessError> {
    (0..truth.len())
        .map(|i| {
            let r = strategies[i].report_state(truth[i], sizes[i], &mut rngs[i]);
            if r >= sizes[i] {
                Err(HarnessError::BadReport { agent: i, state: r })
            } else {
                Ok(r)
            }
        })
        .collect()
}

fn run_mdp(
    world: &MdpWorld,
    planner: &Planner,
    rule: &dyn TransferRule,
    name: &str,
    strategies: &[Strategy],
    horizon: usize,
    seed: u64,
) -> Result<Transcript<usize>, HarnessError> {
    let model = &world.model;
    let sizes: Vec<usize> = model.agents().iter().map(|a| a.num_states()).collect();
    check_state_strategies(&sizes, strategies, false)?;
    let mut rngs = strategy_streams(sizes.len(), seed);
    let mut real = stream(seed, StreamLabel::Real, 0);
    let mut state = world.initial.clone();
    let mut records = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let reports = JointState(collect_reports(state.components(), &sizes, strategies, &mut rngs)?);
        let action = planner.decide(model, &reports);
        let transfers = rule.transfers(model, &reports, &action);
        let charges = rule.charges(model, &reports);
        let (next, rewards) = step(model, &state, &action, &mut real)?;
        let active: Vec<usize> = (0..sizes.len())
            .filter(|i| action[*i] != model.agent(*i).null_action())
            .collect();
        records.push(PeriodRecord {
            t,
            true_state: state.0,
            reports: reports.0,
            action: action.0,
            activated: (active.len() == 1).then(|| active[0]),
            rewards,
            transfers: transfers.0,
            charges,
            index_reports: Vec::new(),
            sample_rewards: Vec::new(),
            frontier_requests: 0,
            comparisons: 0,
        });
        state = next;
    }
    Ok(Transcript {
        mechanism: name.to_string(),
        seed,
        scenario_hash: String::new(),
        discount: model.discount(),
        agents: sizes.len(),
        records,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_chains(
    world: &ChainWorld,
    truth: &[GittinsTable],
    distributed: bool,
    m: usize,
    name: &str,
    strategies: &[Strategy],
    horizon: usize,
    seed: u64,
) -> Result<Transcript<usize>, HarnessError> {
    let n = world.num_agents();
    let sizes: Vec<usize> = world.chains.iter().map(MarkovChainModel::num_states).collect();
    check_state_strategies(&sizes, strategies, distributed)?;
    // the planner computes indices itself unless agents report tables
    let tables = if distributed {
        let overrides: Vec<Option<Vec<f64>>> = strategies.iter().map(Strategy::table_override).collect();
        reported_tables(truth, &overrides)?
    } else {
        truth.to_vec()
    };
    let mut paths: Vec<Vec<SampleTrajectory>> = if distributed {
        (0..n)
            .map(|i| {
                (0..m)
                    .map(|k| SampleTrajectory::new(StreamLabel::Marginal(i), k, world.initial.clone(), seed))
                    .collect()
            })
            .collect()
    } else {
        vec![(0..m)
            .map(|k| SampleTrajectory::new(StreamLabel::Optimal, k, world.initial.clone(), seed))
            .collect()]
    };
    let mut rngs = strategy_streams(n, seed);
    let mut real = stream(seed, StreamLabel::Real, 0);
    let mut state = world.initial.clone();
    let mut records = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let reports = collect_reports(&state, &sizes, strategies, &mut rngs)?;
        let index_reports: Vec<f64> = if distributed {
            tables.iter().zip(&reports).map(|(tb, s)| tb.values[*s]).collect()
        } else {
            Vec::new()
        };
        let mut comparisons = 0;
        let winner = crate::gittins::argmax_index(&tables, &reports, |_| true, &mut comparisons)?
            .expect("at least one chain");
        for set in &mut paths {
            comparisons += advance_samples(set, &world.chains, &tables)?;
        }
        let paid = world.chains[winner].reward[reports[winner]];
        let charges = if distributed {
            dgv_charges(&paths, t)?
        } else {
            vec![sample_charge(&paths[0], t)?; n]
        };
        let transfers = charges
            .iter()
            .enumerate()
            .map(|(j, c)| if j == winner { -c } else { paid - c })
            .collect();
        let mut rewards = vec![0.0; n];
        let s = state[winner];
        rewards[winner] = world.chains[winner].reward[s];
        let next = sample_index(&world.chains[winner].transition[s], &mut real);
        let mut action = vec![MarkovChainModel::NULL; n];
        action[winner] = MarkovChainModel::ACTIVATE;
        records.push(PeriodRecord {
            t,
            true_state: state.clone(),
            reports,
            action,
            activated: Some(winner),
            rewards,
            transfers,
            charges,
            index_reports,
            sample_rewards: paths.iter().flatten().map(|x| x.log()[t]).collect(),
            frontier_requests: 0,
            comparisons,
        });
        state[winner] = next;
    }
    Ok(Transcript {
        mechanism: name.to_string(),
        seed,
        scenario_hash: String::new(),
        discount: world.discount,
        agents: n,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn branching_pair_vcg() -> Prepared {
        Prepared::new(&Scenario::new("branching-pair", World::Mdp(fixtures::branching_pair(0.9)), MechanismKind::Vcg)).unwrap()
    }

    #[test]
    fn default_horizon_bounds_the_tail() {
        for gamma in [0.5, 0.9, 0.99] {
            let h = default_horizon(gamma);
            assert!(gamma.powi(h as i32) < 1e-8);
            assert!(gamma.powi(h as i32 - 1) >= 1e-8);
        }
        assert_eq!(default_horizon(0.9), 175);
    }

    #[test]
    fn replay_is_identical() {
        let p = branching_pair_vcg();
        let strategies = vec![Strategy::Truthful; 2];
        assert_eq!(p.run(&strategies, 50, 4).unwrap(), p.run(&strategies, 50, 4).unwrap());
    }

    #[test]
    fn branching_pair_vcg_payoff_series() {
        let p = branching_pair_vcg();
        let strategies = vec![Strategy::Truthful; 2];
        for seed in 0..20 {
            let tr = p.run(&strategies, 50, seed).unwrap();
            let tr = tr.discrete().unwrap();
            let series: Vec<f64> = tr.records.iter().map(|r| r.payoffs()[1]).collect();
            assert!((series[0] - 0.4).abs() < 1e-12);
            let to_c = tr.records[1].true_state[0] == 1;
            for x in &series[1..] {
                // D pays agent 0 one per period, so the Groves term is 1.0
                let expected = if to_c { -0.1 } else { 0.9 };
                assert!((x - expected).abs() < 1e-12, "seed {seed}: {x}");
            }
        }
    }

    #[test]
    fn groves_payoffs_are_nonnegative() {
        let p = Prepared::new(&Scenario::new("branching-pair", World::Mdp(fixtures::branching_pair(0.9)), MechanismKind::Groves)).unwrap();
        for seed in 0..20 {
            let tr = p.run(&[Strategy::Truthful, Strategy::Truthful], 50, seed).unwrap();
            for r in &tr.discrete().unwrap().records {
                assert!(r.payoffs().iter().all(|x| *x >= 0.0));
            }
        }
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let p = branching_pair_vcg();
        assert!(matches!(p.run(&[Strategy::Truthful], 5, 0), Err(HarnessError::StrategyCount { .. })));
        assert!(matches!(p.run(&[Strategy::Truthful, Strategy::Truthful], 0, 0), Err(HarnessError::Horizon)));
        let bad = vec![Strategy::FixedMisreport { map: vec![0, 1] }, Strategy::Truthful];
        assert!(matches!(p.run(&bad, 5, 0), Err(HarnessError::Strategy { agent: 0, .. })));
        let bad = vec![Strategy::Truthful, Strategy::FixedMisreport { map: vec![5, 5, 5] }];
        assert!(matches!(p.run(&bad, 5, 0), Err(HarnessError::BadReport { agent: 1, state: 5 })));
        let s = Scenario::new("x", World::Mdp(fixtures::branching_pair(0.9)), MechanismKind::Dgv);
        assert!(matches!(Prepared::new(&s), Err(HarnessError::Mismatch { .. })));
    }

    #[test]
    fn sgv_on_deceptive_pair() {
        let s = Scenario::new("pair", World::Chains(fixtures::deceptive_pair_chains()), MechanismKind::Sgv);
        let p = Prepared::new(&s).unwrap();
        let tr = p.run(&[Strategy::Truthful, Strategy::Truthful], 3, 0).unwrap();
        let tr = tr.discrete().unwrap();
        assert_eq!(tr.activations(), vec![Some(1), Some(0), Some(0)]);
        assert_eq!(tr.records[0].transfers, vec![0.0, -1.0]);
        assert_eq!(tr.records[1].transfers, vec![-0.5, 0.0]);
        // m = 16 full-world paths plus one real decision, one comparison each
        assert_eq!(tr.records[0].comparisons, 17);
    }

    #[test]
    fn dgv_on_constant_chains() {
        let s = Scenario::new("const", World::Chains(fixtures::constant_chain_world(&[1.0, 2.0], 0.9)), MechanismKind::Dgv);
        let p = Prepared::new(&s).unwrap();
        let tr = p.run(&[Strategy::Truthful, Strategy::Truthful], 4, 0).unwrap();
        for r in &tr.discrete().unwrap().records {
            assert_eq!(r.activated, Some(1));
            assert_eq!(r.transfers, vec![0.0, -1.0]);
            assert!((r.index_reports[0] - 1.0).abs() < 1e-9 && (r.index_reports[1] - 2.0).abs() < 1e-9);
        }
    }
}
