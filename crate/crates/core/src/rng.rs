//! Seeded random streams.
//!
//! Every consumer of randomness in an episode draws from its own ChaCha
//! stream keyed by `(seed, label, replica)`. Adding or removing sample
//! trajectories therefore never shifts the numbers seen by the real
//! execution path or by any other trajectory.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Who owns a stream within one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamLabel {
    /// The real execution path (world transitions, arm pulls).
    Real,
    /// A sample trajectory of the full-world index policy.
    Optimal,
    /// A sample trajectory of the marginal world without the given agent.
    Marginal(usize),
    /// Private randomness of the given agent's strategy.
    Strategy(usize),
    /// Instance generation for property tests and checks.
    Instance,
}

impl StreamLabel {
    fn code(self, replica: u64) -> u64 {
        debug_assert!(replica < 1 << 32);
        let (kind, agent) = match self {
            StreamLabel::Real => (0u64, 0u64),
            StreamLabel::Optimal => (1, 0),
            StreamLabel::Marginal(i) => (2, i as u64),
            StreamLabel::Strategy(i) => (3, i as u64),
            StreamLabel::Instance => (4, 0),
        };
        (kind << 56) | ((agent & 0xff_ffff) << 32) | (replica & 0xffff_ffff)
    }
}

/// The stream owned by `label` (and `replica`, for trajectories) in the
/// episode seeded with `seed`.
pub fn stream(seed: u64, label: StreamLabel, replica: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label.code(replica));
    rng
}

/// Seed of replica `replica` under a master seed (splitmix64 finalizer).
pub fn replica_seed(master: u64, replica: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(replica.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
