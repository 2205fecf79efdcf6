//! Seed derivation.
//!
//! Every stochastic component draws from a ChaCha stream whose key is derived
//! from a base seed plus a tuple of counters, so results do not depend on the
//! order in which work is executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default top-level seed.
pub const DEFAULT_SEED: u64 = 42;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a list of counters into a new 64-bit seed.
pub fn mix(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Derives a named child seed, e.g. one per subcommand.
pub fn derive(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label bytes
    let h = label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    });
    mix(seed, &[h])
}

/// A deterministic generator keyed by `(seed, keys...)`.
pub fn keyed(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, keys))
}
