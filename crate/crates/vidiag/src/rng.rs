//! Deterministic RNG streams.
//!
//! Everything stochastic in this crate is seeded explicitly. Replicated
//! computations (VSBC replications, multi-seed experiments, parallel chains)
//! derive per-replication streams from a root seed and a stream index, so
//! results are reproducible regardless of execution order or thread count.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// SplitMix64 finalizer; decorrelates nearby integer inputs.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `index` under `root`.
///
/// The rule is `splitmix64(splitmix64(root) + index + 1)`; it is part of the
/// reproducibility contract and must not change between releases.
pub fn child_seed(root: u64, index: u64) -> u64 {
    splitmix64(splitmix64(root).wrapping_add(index).wrapping_add(1))
}

/// RNG for stream `index` under `root`.
pub fn child_rng(root: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(root, index))
}

/// RNG seeded directly from `seed`.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
