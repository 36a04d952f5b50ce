//! Deterministic seed hierarchy: a master seed is split into independent
//! child seeds by hashing (master, counter) pairs, so any fit or chain can be
//! replayed without running the ones before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed number `counter` of `master`.
#[inline]
pub fn derive(master: u64, counter: u64) -> u64 {
    splitmix64(master ^ splitmix64(counter.wrapping_mul(GOLDEN_GAMMA).wrapping_add(1)))
}

/// Folds a path of counters into a single seed.
pub fn derive_path(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |s, &c| derive(s, c))
}

/// Stable 64-bit hash of a string (FNV-1a), for keying seeds by ids.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
