use std::path::PathBuf;

use coordplan::fixtures;
use coordplan::sim_harness::{MechanismKind, Prepared, Scenario, Strategy, World};

fn load(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    let text = std::fs::read_to_string(&path).unwrap();
    Scenario::from_json(&text).unwrap()
}

#[test]
fn branching_pair_file_matches_builder() {
    let s = load("branching-pair.json");
    assert_eq!(s.mechanism, MechanismKind::Vcg);
    match &s.world {
        World::Mdp(w) => assert_eq!(*w, fixtures::branching_pair(0.9)),
        other => panic!("unexpected world {}", other.kind()),
    }
    assert_eq!(s.horizon, Some(50));
}

#[test]
fn deceptive_pair_file_matches_builder() {
    let s = load("deceptive-pair.json");
    assert_eq!(s.mechanism, MechanismKind::Dgv);
    match &s.world {
        World::Chains(w) => assert_eq!(*w, fixtures::deceptive_pair_chains()),
        other => panic!("unexpected world {}", other.kind()),
    }
}

#[test]
fn two_arm_bandit_file_matches_builder() {
    let s = load("two-arm-bandit.json");
    assert_eq!(s.mechanism, MechanismKind::Learning);
    match &s.world {
        World::Bandit(w) => assert_eq!(*w, fixtures::two_arm_bandit()),
        other => panic!("unexpected world {}", other.kind()),
    }
}

#[test]
fn shipped_scenarios_run() {
    for name in ["branching-pair.json", "deceptive-pair.json", "two-arm-bandit.json"] {
        let s = load(name);
        let p = Prepared::new(&s).unwrap();
        let tr = p.run(&vec![Strategy::Truthful; s.world.num_agents()], 10, 1).unwrap();
        assert_eq!(tr.len(), 10);
        assert_eq!(p.hash(), s.hash());
    }
}

#[test]
fn reserialized_file_has_same_hash() {
    let s = load("branching-pair.json");
    let again = Scenario::from_json(&s.to_file().to_json()).unwrap();
    assert_eq!(again.hash(), s.hash());
    assert_ne!(s.with_mechanism(MechanismKind::Groves).hash(), s.hash());
}
