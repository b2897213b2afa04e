//! Deterministic random sources.
//!
//! Every stochastic step in the crate draws from [`SeededRng`], which is
//! ChaCha with 8 rounds (`rand_chacha` 0.9, `ChaCha8Rng::seed_from_u64`).
//! ChaCha is counter based and its output is specified independently of
//! the host platform, so a seed replays the same stream everywhere.
//!
//! Independent sub-streams (per run, per fold, per detector) are keyed by
//! mixing the master seed with a path of indices through SplitMix64.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identity of the generator, echoed into manifests.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9, seed_from_u64)";

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and an index path, e.g.
/// `derive_seed(seed, &[run, k, fold])`. Distinct paths give unrelated seeds
/// and the result does not depend on the order in which children are built.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &p in path {
        state = splitmix64(state ^ splitmix64(p.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    state
}

pub fn derived_rng(master: u64, path: &[u64]) -> SeededRng {
    seeded_rng(derive_seed(master, path))
}
