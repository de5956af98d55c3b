//! Seed derivation.
//!
//! All randomness is drawn from ChaCha8 streams keyed by a `(seed, stream)`
//! pair, so work items can be generated in any order or on any thread and
//! still reproduce the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for work item `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a label into a seed (splitmix64 finalizer), giving an independent
/// seed for a sub-component.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for scheduling round `round` of a run seeded with `master`.
pub fn round_rng(master: u64, round: u64) -> ChaCha8Rng {
    stream_rng(derive_seed(master, 0x72_6f75_6e64), round)
}
