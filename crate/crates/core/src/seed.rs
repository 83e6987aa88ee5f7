//! Deterministic per-replica seeding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used by every simulator.
pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer; a bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replica `replica` under `master`. Distinct replicas get distinct
/// seeds for a fixed master because both mixing steps are bijections.
pub fn derive_seed(master: u64, replica: u64) -> u64 {
    mix64(master.wrapping_add(mix64(replica)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Generator for replica `replica` under `master`.
pub fn replica_rng(master: u64, replica: u64) -> SimRng {
    rng_from_seed(derive_seed(master, replica))
}
