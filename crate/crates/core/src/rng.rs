//! Keyed deterministic random streams.
//!
//! Every stream is a ChaCha8 generator seeded from a mix of the run seed and
//! a key path, so draws never depend on scheduling or evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const TAG_AUTH: u64 = 1;
pub(crate) const TAG_FORWARD: u64 = 2;
pub(crate) const TAG_TOKEN: u64 = 3;
pub(crate) const TAG_DEVICE_MODEL: u64 = 4;
pub(crate) const TAG_SYNTH: u64 = 5;
pub(crate) const TAG_SOURCES: u64 = 6;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn mix(seed: u64, key: &[u64]) -> u64 {
    key.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub(crate) fn keyed_rng(seed: u64, key: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, key))
}
