//! Seeded random streams keyed by a tuple of integers, so that work split
//! across threads draws the same numbers regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, keys...)`.
pub fn stream(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix64(seed);
    for &k in keys {
        h = splitmix64(h ^ splitmix64(k.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    ChaCha8Rng::seed_from_u64(h)
}

// stream domains
pub(crate) const DOMAIN_CONTEXT: u64 = 1;
pub(crate) const DOMAIN_EPOCH: u64 = 2;
pub(crate) const DOMAIN_JITTER: u64 = 3;
pub(crate) const DOMAIN_METRIC_ANGLE: u64 = 4;
pub(crate) const DOMAIN_EFFECTIVE_RANK: u64 = 5;
