//! Deterministic seed derivation for replicated experiments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `rep` at sample size `n`, derived from `master`.
///
/// Each component passes through a full SplitMix64 round before being folded in,
/// so nearby (n, rep) pairs land on unrelated streams.
pub fn derive_seed(master: u64, n: u64, rep: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ splitmix64(n.wrapping_add(0x632B_E59B_D9B4_E019)));
    splitmix64(b ^ splitmix64(rep.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// Generator used throughout the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
