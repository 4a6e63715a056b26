//! Monte Carlo estimation over seeded replicas.

use rayon::prelude::*;

use crate::rng::replica_seed;

use super::episode::Prepared;
use super::metrics::{Metric, MetricReport};
use super::strategy::Strategy;
use super::HarnessError;

/// The metric of each replica episode, in replica order. Replica `k` runs
/// with seed `replica_seed(seed, k)`.
pub fn replica_values(
    prepared: &Prepared,
    strategies: &[Strategy],
    horizon: usize,
    replicas: usize,
    seed: u64,
    metric: Metric,
) -> Result<Vec<f64>, HarnessError> {
    (0..replicas)
        .into_par_iter()
        .map(|k| {
            let tr = prepared.run(strategies, horizon, replica_seed(seed, k as u64))?;
            Ok(tr.metrics().value(metric))
        })
        .collect()
}

/// Mean, standard error and 95% interval of `metric` over independent
/// replicas.
pub fn estimate(
    prepared: &Prepared,
    strategies: &[Strategy],
    horizon: usize,
    replicas: usize,
    seed: u64,
    metric: Metric,
) -> Result<MetricReport, HarnessError> {
    if replicas < 2 {
        return Err(HarnessError::Replicas { min: 2, got: replicas });
    }
    let values = replica_values(prepared, strategies, horizon, replicas, seed, metric)?;
    Ok(MetricReport::from_samples(&values))
}

/// Payoff gain of `deviator` playing `deviation` instead of truthful
/// reporting, paired by seed so both runs share every random stream.
pub fn deviation_gain(
    prepared: &Prepared,
    deviator: usize,
    deviation: &Strategy,
    horizon: usize,
    replicas: usize,
    seed: u64,
) -> Result<MetricReport, HarnessError> {
    if replicas < 2 {
        return Err(HarnessError::Replicas { min: 2, got: replicas });
    }
    let n = prepared.num_agents();
    if deviator >= n {
        return Err(HarnessError::Strategy { agent: deviator, detail: "no such agent".into() });
    }
    let truthful = vec![Strategy::Truthful; n];
    let mut deviating = truthful.clone();
    deviating[deviator] = deviation.clone();
    let metric = Metric::AgentPayoff(deviator);
    let gains = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let s = replica_seed(seed, k as u64);
            let base = prepared.run(&truthful, horizon, s)?.metrics().value(metric);
            let dev = prepared.run(&deviating, horizon, s)?.metrics().value(metric);
            Ok(dev - base)
        })
        .collect::<Result<Vec<f64>, HarnessError>>()?;
    Ok(MetricReport::from_samples(&gains))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::sim_harness::{MechanismKind, Scenario, World};

    fn prepared(kind: MechanismKind, world: World) -> Prepared {
        Prepared::new(&Scenario::new("t", world, kind)).unwrap()
    }

    #[test]
    fn truthful_against_itself_is_exactly_zero() {
        let p = prepared(MechanismKind::Vcg, World::Mdp(fixtures::branching_pair(0.9)));
        let values = (0..50)
            .map(|k| {
                let s = replica_seed(3, k);
                let a = p.run(&[Strategy::Truthful, Strategy::Truthful], 40, s).unwrap();
                let b = p.run(&[Strategy::Truthful, Strategy::Truthful], 40, s).unwrap();
                a.metrics().value(Metric::AgentPayoff(1)) - b.metrics().value(Metric::AgentPayoff(1))
            })
            .collect::<Vec<_>>();
        assert!(values.iter().all(|x| *x == 0.0));
        let r = deviation_gain(&p, 1, &Strategy::Truthful, 40, 50, 3).unwrap();
        assert_eq!((r.mean, r.stderr, r.ci_low, r.ci_high), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn deterministic_scenario_has_zero_width() {
        let p = prepared(MechanismKind::Vcg, World::Mdp(fixtures::constant_chains(&[1.0, 2.0], 0.9)));
        let r = estimate(&p, &[Strategy::Truthful, Strategy::Truthful], 30, 20, 1, Metric::Welfare).unwrap();
        assert_eq!(r.stderr, 0.0);
        assert_eq!(r.ci_low, r.ci_high);
    }

    #[test]
    fn too_few_replicas() {
        let p = prepared(MechanismKind::Groves, World::Mdp(fixtures::branching_pair(0.9)));
        let err = estimate(&p, &[Strategy::Truthful, Strategy::Truthful], 5, 1, 0, Metric::Welfare);
        assert_eq!(err.unwrap_err(), HarnessError::Replicas { min: 2, got: 1 });
    }

    #[test]
    fn report_charged_rewards_lying() {
        let p = prepared(MechanismKind::ReportCharged, World::Mdp(fixtures::misreport_bait()));
        let lie = Strategy::FixedMisreport { map: vec![1, 1] };
        let r = deviation_gain(&p, 0, &lie, 60, 20, 9).unwrap();
        assert!(r.ci_low > 0.0, "{r:?}");
    }

    #[test]
    fn replica_order_is_stable() {
        let p = prepared(MechanismKind::Vcg, World::Mdp(fixtures::branching_pair(0.9)));
        let s = [Strategy::Truthful, Strategy::Truthful];
        let a = replica_values(&p, &s, 20, 64, 5, Metric::IrViolated(1)).unwrap();
        let b = replica_values(&p, &s, 20, 64, 5, Metric::IrViolated(1)).unwrap();
        assert_eq!(a, b);
    }
}
