//! Deterministic random-number streams.
//!
//! Every random quantity in a run is drawn from a ChaCha8 generator. Streams
//! for independent purposes (observations, SMC runs, leaf sampling, ...) are
//! derived from a single master seed by folding a list of integer labels
//! through the SplitMix64 finalizer; the result seeds the generator via
//! `SeedableRng::seed_from_u64`. A stream therefore depends only on the
//! master seed and its labels, never on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every stream.
pub type StreamRng = ChaCha8Rng;

/// Name recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), seeds derived by SplitMix64";

/// Purpose labels mixed into derived seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Observations = 1,
    Smc = 2,
    Leaves = 3,
    Coalescent = 4,
    Resampling = 5,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `labels` into `master`.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(master), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

/// Generator for `seed` with no further derivation.
pub fn seeded(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Seed of the stream `(domain, labels...)` under `master`.
pub fn stream_seed(master: u64, domain: Domain, labels: &[u64]) -> u64 {
    let mut seed = derive_seed(master, &[domain as u64]);
    for &l in labels {
        seed = derive_seed(seed, &[l]);
    }
    seed
}

/// Generator for the stream `(domain, labels...)` under `master`.
pub fn stream(master: u64, domain: Domain, labels: &[u64]) -> StreamRng {
    seeded(stream_seed(master, domain, labels))
}
