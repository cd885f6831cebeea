//! Deterministic RNG streams.
//!
//! Every random quantity in the pipeline is drawn from a ChaCha8 stream keyed
//! by a master seed and a small tuple of indices, so results never depend on
//! how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains keep seeds for different purposes apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Simulation = 1,
    RandomWalk = 2,
    RandomFeatures = 3,
    Folds = 4,
    Subsample = 5,
    Generator = 6,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes `(master, domain, a, b)` into a 64-bit seed.
pub fn derive_seed(master: u64, domain: Domain, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(master ^ (domain as u64).wrapping_mul(0xA24B_AED4_963E_E407));
    h = splitmix64(h ^ a);
    splitmix64(h ^ b.wrapping_mul(0x9FB2_1C65_1E98_DF25))
}

pub fn stream(master: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, domain, a, b))
}
