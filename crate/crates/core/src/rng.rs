//! Seed derivation. Every random draw in the crate comes from a ChaCha stream
//! whose seed is derived from the run seed, so results are replayable and
//! independent of how work is partitioned across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a stream identifier.
pub fn mix(parent: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(stream.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

/// `mix` applied twice, e.g. `mix3(run_seed, series_index, epoch)`.
pub fn mix3(parent: u64, a: u64, b: u64) -> u64 {
    mix(mix(parent, a), b)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
