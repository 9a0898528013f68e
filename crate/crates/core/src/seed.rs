//! Deterministic seed derivation.
//!
//! Every random stream in the crate is keyed by a `u64` seed. Child streams
//! (per trial, per structure, per test row) are derived by mixing the parent
//! seed with a list of integer labels, so results never depend on the order
//! in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix `seed` with each label in turn.
pub fn derive(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix(seed), |acc, &l| splitmix(acc ^ splitmix(l.wrapping_add(GOLDEN))))
}

pub fn rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn child_rng(seed: u64, labels: &[u64]) -> SimRng {
    rng(derive(seed, labels))
}

/// A single uniform draw in `[0, 1)` keyed by `(seed, labels)`.
pub fn keyed_uniform(seed: u64, labels: &[u64]) -> f64 {
    (derive(seed, labels) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Stable 64-bit label for a string (algorithm names etc.).
pub fn label(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}
