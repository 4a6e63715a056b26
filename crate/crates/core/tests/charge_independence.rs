use coordplan::fixtures;
use coordplan::gittins::ChainWorld;
use coordplan::rng::{stream, StreamLabel};
use coordplan::sim_harness::{MechanismKind, Prepared, Scenario, Strategy, World};
use proptest::prelude::*;
use rand::Rng;

fn bits(xs: &[f64]) -> Vec<u64> {
    xs.iter().map(|x| x.to_bits()).collect()
}

fn charges(p: &Prepared, strategies: &[Strategy], seed: u64) -> Vec<Vec<u64>> {
    p.run(strategies, 30, seed).unwrap().charge_streams().iter().map(|c| bits(c)).collect()
}

fn dgv(world: &ChainWorld, m: usize) -> Prepared {
    let mut s = Scenario::new("dgv", World::Chains(world.clone()), MechanismKind::Dgv);
    s.m = Some(m);
    Prepared::new(&s).unwrap()
}

fn chain_perturbations(world: &ChainWorld, agent: usize, seed: u64) -> Vec<Strategy> {
    let k = world.chains[agent].num_states();
    let mut rng = stream(seed, StreamLabel::Instance, 7);
    vec![
        Strategy::FixedMisreport { map: (0..k).map(|_| rng.random_range(0..k)).collect() },
        Strategy::RandomMisreport { probability: 0.5 },
        Strategy::IndexManipulation { table: (0..k).map(|_| rng.random_range(-1.0..2.0)).collect() },
    ]
}

/// Every agent's charge stream is unchanged when `agent` deviates with any
/// of `deviations`; `others_fixed` also requires the other agents' streams
/// to be unchanged.
fn assert_invariant(p: &Prepared, n: usize, agent: usize, deviations: &[Strategy], seed: u64, others_fixed: bool) {
    let truthful = vec![Strategy::Truthful; n];
    let base = charges(p, &truthful, seed);
    for d in deviations {
        let mut s = truthful.clone();
        s[agent] = d.clone();
        let moved = charges(p, &s, seed);
        assert_eq!(moved[agent], base[agent], "own charge moved under {d:?}");
        if others_fixed {
            for j in (0..n).filter(|j| *j != agent) {
                assert_eq!(moved[j], base[j], "agent {j}'s charge moved when {agent} played {d:?}");
            }
        }
    }
}

#[test]
fn two_chain_fixtures() {
    for world in [fixtures::deceptive_pair_chains(), fixtures::constant_chain_world(&[0.3, 0.7], 0.9)] {
        let p = dgv(&world, 8);
        for agent in 0..2 {
            for seed in 0..5 {
                assert_invariant(&p, 2, agent, &chain_perturbations(&world, agent, seed), seed, true);
            }
        }
    }
}

#[test]
fn two_arm_bandit_frontier_and_state_reports() {
    let world = fixtures::two_arm_bandit();
    let mut s = Scenario::new("bandit", World::Bandit(world), MechanismKind::Learning);
    s.m = Some(4);
    let p = Prepared::new(&s).unwrap();
    let deviations = [
        Strategy::FrontierMisreport { bias: 0.3 },
        Strategy::FrontierMisreport { bias: -0.2 },
        Strategy::StateIndexInconsistent { boost: 0.5 },
    ];
    for agent in 0..2 {
        for seed in 0..5 {
            assert_invariant(&p, 2, agent, &deviations, seed, true);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_two_chain_worlds(seed in any::<u64>(), agent in 0usize..2) {
        let world = fixtures::random_chain_world(2, 4, 0.8, &mut stream(seed, StreamLabel::Instance, 0));
        let p = dgv(&world, 4);
        assert_invariant(&p, 2, agent, &chain_perturbations(&world, agent, seed), seed, true);
    }

    #[test]
    fn own_charge_with_three_chains(seed in any::<u64>(), agent in 0usize..3) {
        let world = fixtures::random_chain_world(3, 4, 0.8, &mut stream(seed, StreamLabel::Instance, 0));
        let p = dgv(&world, 4);
        assert_invariant(&p, 3, agent, &chain_perturbations(&world, agent, seed), seed, false);
    }

    #[test]
    fn own_charge_with_three_arms(seed in 0u64..1000, bias in -0.5f64..0.5) {
        let mut world = fixtures::two_arm_bandit();
        world.arms.push(coordplan::bandit_learning::Arm { ground_truth_p: 0.5, prior_string: "01".into() });
        world.horizon = 30;
        let mut s = Scenario::new("bandit", World::Bandit(world), MechanismKind::Learning);
        s.m = Some(3);
        let p = Prepared::new(&s).unwrap();
        assert_invariant(&p, 3, 0, &[Strategy::FrontierMisreport { bias }], seed, false);
    }
}

/// With three agents, agent 0's reported table reorders the marginal world
/// without agent 1, which still contains agent 0 and agent 2, so agent 1's
/// charge legitimately moves.
#[test]
fn other_charges_can_move_with_three_chains() {
    let world = fixtures::constant_chain_world(&[0.2, 0.5, 0.9], 0.5);
    let p = dgv(&world, 2);
    let truthful = vec![Strategy::Truthful; 3];
    let base = charges(&p, &truthful, 0);
    let mut lie = truthful.clone();
    lie[0] = Strategy::IndexManipulation { table: vec![5.0] };
    let moved = charges(&p, &lie, 0);
    assert_eq!(moved[0], base[0]);
    assert_ne!(moved[1], base[1]);
}
