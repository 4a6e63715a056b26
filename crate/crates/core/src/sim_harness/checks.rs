//! The verification checks behind `verify` and the acceptance suite.
//!
//! Each check returns a report with the measured numbers instead of
//! panicking, so callers decide how to surface a failure.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use crate::bandit_learning::{run_centralized, run_learning_mechanism, Arm, BanditWorld, LAPLACE};
use crate::fixtures;
use crate::gittins::{compute_tables, index_joint_policy, ChainWorld, INDEX_TOLERANCE};
use crate::mdp_core::{evaluate_policy_subset, policy_value, value_iterate, MdpWorld};
use crate::mechanisms::{
    best_response_value, budget_identity, precompute_vcg_charges, Groves, Planner, ReportLinkedCharge,
    TransferRule, Vcg,
};
use crate::rng::{stream, StreamLabel};

use super::episode::Prepared;
use super::estimate::estimate;
use super::metrics::Metric;
use super::scenario::{MechanismKind, Scenario, World};
use super::strategy::Strategy;
use super::HarnessError;

pub const TRUTHFUL_TOLERANCE: f64 = 1e-8;
pub const BUDGET_TOLERANCE: f64 = 1e-9;
pub const OPTIMALITY_TOLERANCE: f64 = 1e-6;
pub const EXPONENT_RANGE: (f64, f64) = (0.8, 1.2);

/// Outcome of one check with the numbers it measured.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub details: Vec<String>,
}

impl CheckReport {
    fn new(name: &str) -> Self {
        Self { name: name.to_string(), passed: true, details: Vec::new() }
    }

    fn record(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.details.push(line);
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", if self.passed { "PASS" } else { "FAIL" }, self.name)?;
        for d in &self.details {
            writeln!(f, "  {d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckName {
    Truthful,
    Budget,
    Ir,
    GittinsOptimal,
    WeakBudget,
    LearningEquiv,
    Scaling,
}

impl CheckName {
    pub const ALL: [CheckName; 7] = [
        CheckName::Truthful,
        CheckName::Budget,
        CheckName::Ir,
        CheckName::GittinsOptimal,
        CheckName::WeakBudget,
        CheckName::LearningEquiv,
        CheckName::Scaling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckName::Truthful => "truthful",
            CheckName::Budget => "budget",
            CheckName::Ir => "ir",
            CheckName::GittinsOptimal => "gittins-optimal",
            CheckName::WeakBudget => "weak-budget",
            CheckName::LearningEquiv => "learning-equiv",
            CheckName::Scaling => "scaling",
        }
    }
}

impl FromStr for CheckName {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| HarnessError::Parse(format!("unknown check `{s}`")))
    }
}

fn random_instances(count: usize, seed: u64) -> Vec<MdpWorld> {
    (0..count as u64)
        .map(|k| fixtures::random_world(&mut stream(seed, StreamLabel::Instance, k)))
        .collect()
}

fn vcg_rule(world: &MdpWorld, planner: &Planner) -> Result<Vcg, HarnessError> {
    Ok(Vcg { schedule: precompute_vcg_charges(&world.model, &planner.policy, &world.initial)? })
}

/// Largest best-response gain over truthful reporting, across agents and
/// states.
pub fn max_deviation_gain(world: &MdpWorld, planner: &Planner, rule: &dyn TransferRule) -> Result<f64, HarnessError> {
    let mut gain = f64::NEG_INFINITY;
    for i in 0..world.model.num_agents() {
        gain = gain.max(best_response_value(&world.model, &planner.policy, rule, i)?.max_gain());
    }
    Ok(gain)
}

/// Groves and VCG admit no profitable deviation on `worlds` plus `random`
/// seeded instances, and the report-charged control does.
pub fn check_truthful(worlds: &[(&str, MdpWorld)], random: usize, seed: u64) -> Result<CheckReport, HarnessError> {
    let mut report = CheckReport::new("truthful");
    let generated = random_instances(random, seed);
    let mut worst = [f64::NEG_INFINITY; 2];
    for (label, world) in worlds.iter().map(|(l, w)| (*l, w)).chain(generated.iter().map(|w| ("", w))) {
        let planner = Planner::solve(&world.model)?;
        let vcg = vcg_rule(world, &planner)?;
        let gains = [
            max_deviation_gain(world, &planner, &Groves)?,
            max_deviation_gain(world, &planner, &vcg)?,
        ];
        if !label.is_empty() {
            report.record(
                gains.iter().all(|g| *g <= TRUTHFUL_TOLERANCE),
                format!("{label}: max gain groves {:.3e}, vcg {:.3e} (limit {TRUTHFUL_TOLERANCE:e})", gains[0], gains[1]),
            );
        }
        for k in 0..2 {
            worst[k] = worst[k].max(gains[k]);
        }
    }
    if random > 0 {
        report.record(
            worst.iter().all(|g| *g <= TRUTHFUL_TOLERANCE),
            format!(
                "{random} random instances: max gain groves {:.3e}, vcg {:.3e} (limit {TRUTHFUL_TOLERANCE:e})",
                worst[0], worst[1]
            ),
        );
    }
    let bait = fixtures::misreport_bait();
    let planner = Planner::solve(&bait.model)?;
    let control = max_deviation_gain(&bait, &planner, &ReportLinkedCharge::new(&bait.model, &planner.policy))?;
    report.record(control > 0.0, format!("report-charged control: max gain {control:.6} (must be > 0)"));
    Ok(report)
}

/// `(n−1)·V*(s⁰) − Σᵢ V*₋ᵢ(s⁰)` and the exact expected VCG transfer total
/// vanish on `worlds` and `random` instances; optionally, the Monte Carlo
/// net transfer of the first world's VCG episodes has 0 in its interval.
pub fn check_budget(
    worlds: &[(&str, MdpWorld)],
    random: usize,
    seed: u64,
    monte_carlo: Option<(usize, usize)>,
) -> Result<CheckReport, HarnessError> {
    let mut report = CheckReport::new("budget");
    let generated = random_instances(random, seed);
    let mut worst: f64 = 0.0;
    for (label, world) in worlds.iter().map(|(l, w)| (*l, w)).chain(generated.iter().map(|w| ("", w))) {
        let planner = Planner::solve(&world.model)?;
        let vcg = vcg_rule(world, &planner)?;
        let id = budget_identity(&world.model, &planner.policy, &vcg, &world.initial)?;
        let err = id.residual.abs().max(id.transfer_value.abs());
        if !label.is_empty() {
            report.record(
                err <= BUDGET_TOLERANCE,
                format!(
                    "{label}: residual {:.3e}, expected transfer {:.3e} (limit {BUDGET_TOLERANCE:e})",
                    id.residual, id.transfer_value
                ),
            );
        }
        worst = worst.max(err);
    }
    if random > 0 {
        report.record(
            worst <= BUDGET_TOLERANCE,
            format!("{random} random instances: worst {worst:.3e} (limit {BUDGET_TOLERANCE:e})"),
        );
    }
    if let (Some((replicas, horizon)), Some((label, world))) = (monte_carlo, worlds.first()) {
        let p = Prepared::new(&Scenario::new(label, World::Mdp(world.clone()), MechanismKind::Vcg))?;
        let truthful = vec![Strategy::Truthful; world.model.num_agents()];
        let r = estimate(&p, &truthful, horizon, replicas, seed, Metric::NetTransfer)?;
        report.record(
            r.contains(0.0),
            format!(
                "{label}: net transfer {:.3e} ± {:.1e}, 95% CI [{:.3e}, {:.3e}] over {replicas} replicas",
                r.mean, r.stderr, r.ci_low, r.ci_high
            ),
        );
    }
    Ok(report)
}

/// Every realized Groves period payoff is nonnegative; reports how often
/// VCG payoffs go negative for comparison.
pub fn check_ir(world: &MdpWorld, replicas: usize, horizon: usize, seed: u64) -> Result<CheckReport, HarnessError> {
    let mut report = CheckReport::new("ir");
    let n = world.model.num_agents();
    let truthful = vec![Strategy::Truthful; n];
    let groves = Prepared::new(&Scenario::new("ir", World::Mdp(world.clone()), MechanismKind::Groves))?;
    let mut negative = 0usize;
    let mut min_payoff = f64::INFINITY;
    for k in 0..replicas {
        let tr = groves.run(&truthful, horizon, crate::rng::replica_seed(seed, k as u64))?;
        for r in &tr.discrete().expect("joint-model transcript").records {
            for p in r.payoffs() {
                min_payoff = min_payoff.min(p);
                negative += usize::from(p < 0.0);
            }
        }
    }
    report.record(
        negative == 0,
        format!("groves: {negative} negative period payoffs, minimum {min_payoff} over {replicas} episodes"),
    );
    if replicas >= 2 {
        let vcg = Prepared::new(&Scenario::new("ir", World::Mdp(world.clone()), MechanismKind::Vcg))?;
        for i in 0..n {
            let r = estimate(&vcg, &truthful, horizon, replicas, seed, Metric::IrViolated(i))?;
            report.details.push(format!("vcg agent {i}: ex post IR violated in {:.4} of episodes", r.mean));
        }
    }
    Ok(report)
}

/// The index policy's exact value against the value-iteration optimum on
/// `instances` seeded chain worlds (2–3 chains, up to 4 states, γ
/// alternating between 0.5 and 0.9), plus the deceptive pair's 1.5.
pub fn check_gittins_optimal(instances: usize, seed: u64, extra: Option<&ChainWorld>) -> Result<CheckReport, HarnessError> {
    let mut report = CheckReport::new("gittins-optimal");
    let gap = |world: &ChainWorld| -> Result<(f64, f64), HarnessError> {
        let joint = world.joint()?;
        let tables = compute_tables(world, INDEX_TOLERANCE)?;
        let policy = index_joint_policy(&joint.model, &tables)?;
        let index_value = policy_value(&joint.model, &policy, &joint.initial);
        let optimum = value_iterate(&joint.model, 1e-12)?.get(&joint.model, &joint.initial);
        Ok((index_value, optimum))
    };
    let mut worst: f64 = 0.0;
    for k in 0..instances as u64 {
        let mut rng = stream(seed, StreamLabel::Instance, k);
        let count = rng.random_range(2..=3);
        let discount = if k % 2 == 0 { 0.5 } else { 0.9 };
        let world = fixtures::random_chain_world(count, 4, discount, &mut rng);
        let (v, opt) = gap(&world)?;
        worst = worst.max((v - opt).abs());
    }
    if instances > 0 {
        report.record(
            worst <= OPTIMALITY_TOLERANCE,
            format!("{instances} instances: worst |index value − optimum| {worst:.3e} (limit {OPTIMALITY_TOLERANCE:e})"),
        );
    }
    let (v, _) = gap(&fixtures::deceptive_pair_chains())?;
    report.record((v - 1.5).abs() <= OPTIMALITY_TOLERANCE, format!("deceptive pair: index policy value {v:.12} (expected 1.5)"));
    if let Some(world) = extra {
        let (v, opt) = gap(world)?;
        report.record(
            (v - opt).abs() <= OPTIMALITY_TOLERANCE,
            format!("scenario: index value {v:.12}, optimum {opt:.12}"),
        );
    }
    Ok(report)
}

/// Per-agent terms of the weak budget argument, all exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakBudgetTerms {
    /// Value of the index policy in the world without the agent.
    pub marginal: f64,
    /// Others' value under the full-world index policy.
    pub others: f64,
    /// The agent's own value under the full-world index policy.
    pub own: f64,
}

pub fn weak_budget_terms(world: &ChainWorld) -> Result<Vec<WeakBudgetTerms>, HarnessError> {
    let joint = world.joint()?;
    let tables = compute_tables(world, INDEX_TOLERANCE)?;
    let policy = index_joint_policy(&joint.model, &tables)?;
    (0..world.num_agents())
        .map(|i| {
            let marginal = match world.without(i) {
                None => 0.0,
                Some(rest) => {
                    let j = rest.joint()?;
                    let t = compute_tables(&rest, INDEX_TOLERANCE)?;
                    let p = index_joint_policy(&j.model, &t)?;
                    policy_value(&j.model, &p, &j.initial)
                }
            };
            let others = evaluate_policy_subset(&joint.model, &policy, i, &joint.initial)?;
            let total = policy_value(&joint.model, &policy, &joint.initial);
            Ok(WeakBudgetTerms { marginal, others, own: total - others })
        })
        .collect()
}

/// The marginal-world value never exceeds the agent's payoff under the
/// full-world policy, per agent; the exact expected net transfer
/// `Σᵢ (others − marginal)` is reported alongside.
pub fn check_weak_budget(worlds: &[(&str, ChainWorld)]) -> Result<CheckReport, HarnessError> {
    let mut report = CheckReport::new("weak-budget");
    for (label, world) in worlds {
        let terms = weak_budget_terms(world)?;
        let mut net = 0.0;
        for (i, t) in terms.iter().enumerate() {
            report.record(
                t.marginal <= t.others + t.own + BUDGET_TOLERANCE,
                format!(
                    "{label} agent {i}: marginal {:.9} ≤ others {:.9} + own {:.9}",
                    t.marginal, t.others, t.own
                ),
            );
            net += t.others - t.marginal;
        }
        report.details.push(format!("{label}: exact expected net transfer {net:.9}"));
    }
    Ok(report)
}

/// The learning mechanism with truthful agents activates the same arms as
/// a planner computing every index itself, for `seeds` seeds.
pub fn check_learning_equiv(world: &BanditWorld, seeds: u64, horizon: usize) -> Result<CheckReport, HarnessError> {
    let mut report = CheckReport::new("learning-equiv");
    let oracle = world.oracle()?;
    let truthful = vec![Strategy::Truthful; world.arms.len()];
    let mut mismatched = Vec::new();
    for seed in 0..seeds {
        let tr = run_learning_mechanism(world, &truthful, world.m, horizon, seed, &oracle)?;
        let mechanism: Vec<usize> = tr.activations().into_iter().map(|a| a.expect("one arm per period")).collect();
        let central = run_centralized(world, horizon, seed, &oracle)?;
        if mechanism != central {
            mismatched.push(seed);
        }
    }
    report.record(
        mismatched.is_empty(),
        format!("{} of {seeds} seeds differ over horizon {horizon}: {mismatched:?}", mismatched.len()),
    );
    Ok(report)
}

/// Mean comparisons per period for one population size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub comparisons: f64,
}

/// `n` arms with seeded hidden rates in [0.05, 0.95] and empty priors.
pub fn scaling_world(n: usize, m: usize, horizon: usize, seed: u64) -> BanditWorld {
    let mut rng = stream(seed, StreamLabel::Instance, n as u64);
    BanditWorld {
        arms: (0..n)
            .map(|_| Arm { ground_truth_p: rng.random_range(0.05..0.95), prior_string: String::new() })
            .collect(),
        discount: 0.9,
        epsilon: 1e-6,
        r_max: 1.0,
        base: LAPLACE,
        m,
        horizon,
    }
}

/// Mean comparisons per period, excluding the initial ranking at period 0.
pub fn learning_comparisons(n: usize, m: usize, horizon: usize, seeds: u64) -> Result<ScalingPoint, HarnessError> {
    let mut total = 0u64;
    let mut periods = 0u64;
    for seed in 0..seeds {
        let world = scaling_world(n, m, horizon, seed);
        let oracle = world.oracle()?;
        let tr = run_learning_mechanism(&world, &vec![Strategy::Truthful; n], m, horizon, seed, &oracle)?;
        for r in tr.records.iter().skip(1) {
            total += r.comparisons;
            periods += 1;
        }
    }
    Ok(ScalingPoint { n, comparisons: total as f64 / periods.max(1) as f64 })
}

/// Least-squares slope of `ln comparisons` on `ln n`.
pub fn fit_exponent(points: &[ScalingPoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.comparisons.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Per-period comparison counts grow linearly in the number of agents at
/// fixed `m`.
pub fn check_scaling(ns: &[usize], m: usize, horizon: usize, seeds: u64) -> Result<CheckReport, HarnessError> {
    let mut report = CheckReport::new("scaling");
    let points = ns
        .iter()
        .map(|n| learning_comparisons(*n, m, horizon, seeds))
        .collect::<Result<Vec<_>, _>>()?;
    for p in &points {
        report.details.push(format!("n = {}: {:.2} comparisons per period", p.n, p.comparisons));
    }
    let slope = fit_exponent(&points);
    let (lo, hi) = EXPONENT_RANGE;
    report.record(
        (lo..=hi).contains(&slope),
        format!("exponent {slope:.3} (expected in [{lo}, {hi}]) at m = {m}, horizon {horizon}, {seeds} seeds"),
    );
    Ok(report)
}

/// Runs a named check at its standard scale against a scenario's world.
pub fn run_check(check: CheckName, scenario: &Scenario) -> Result<CheckReport, HarnessError> {
    let label = scenario.name.as_str();
    let seed = scenario.seed;
    let joint = || -> Result<MdpWorld, HarnessError> {
        match &scenario.world {
            World::Mdp(w) => Ok(w.clone()),
            World::Chains(w) => Ok(w.joint()?),
            World::Bandit(_) => Err(HarnessError::CheckWorld { check: check.name(), world: "bandit" }),
        }
    };
    let horizon = || scenario.horizon.unwrap_or_else(|| super::default_horizon(scenario.world.discount()));
    match check {
        CheckName::Truthful => check_truthful(&[(label, joint()?)], 50, seed),
        CheckName::Budget => {
            let mc = (scenario.replicas >= 2).then(|| (scenario.replicas, horizon()));
            check_budget(&[(label, joint()?)], 50, seed, mc)
        }
        CheckName::Ir => check_ir(&joint()?, scenario.replicas.max(2), horizon(), seed),
        CheckName::GittinsOptimal => match &scenario.world {
            World::Chains(w) => check_gittins_optimal(100, seed, Some(w)),
            _ => check_gittins_optimal(100, seed, None),
        },
        CheckName::WeakBudget => match &scenario.world {
            World::Chains(w) => check_weak_budget(&[(label, w.clone())]),
            _ => Err(HarnessError::CheckWorld { check: check.name(), world: scenario.world.kind() }),
        },
        CheckName::LearningEquiv => match &scenario.world {
            World::Bandit(w) => check_learning_equiv(w, 100, scenario.horizon.unwrap_or(w.horizon)),
            _ => Err(HarnessError::CheckWorld { check: check.name(), world: scenario.world.kind() }),
        },
        CheckName::Scaling => check_scaling(&[4, 8, 16, 32], 4, 200, 3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_of_exact_power_law() {
        let points: Vec<ScalingPoint> =
            [2, 4, 8].iter().map(|n| ScalingPoint { n: *n, comparisons: 3.0 * (*n as f64).powf(1.5) }).collect();
        assert!((fit_exponent(&points) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn check_names_round_trip() {
        for c in CheckName::ALL {
            assert_eq!(c.name().parse::<CheckName>().unwrap(), c);
        }
        assert!("nope".parse::<CheckName>().is_err());
    }

    #[test]
    fn branching_pair_truthful_and_budget() {
        let world = fixtures::branching_pair(0.9);
        assert!(check_truthful(&[("branching-pair", world.clone())], 3, 1).unwrap().passed);
        assert!(check_budget(&[("branching-pair", world)], 3, 1, Some((200, 60))).unwrap().passed);
    }

    #[test]
    fn deceptive_pair_weak_budget() {
        let r = check_weak_budget(&[("pair", fixtures::deceptive_pair_chains())]).unwrap();
        assert!(r.passed, "{r}");
        let terms = weak_budget_terms(&fixtures::deceptive_pair_chains()).unwrap();
        // without A only B's single reward 1 remains; without B, A earns 0.5/(1−0.5)
        assert!((terms[0].marginal - 1.0).abs() < 1e-12);
        assert!((terms[1].marginal - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gittins_optimal_small() {
        assert!(check_gittins_optimal(6, 2, None).unwrap().passed);
    }
}
