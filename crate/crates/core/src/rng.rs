//! Seeded random streams.
//!
//! Every random decision in the crate draws from ChaCha8 (RFC 7539 block
//! function, 8 rounds) seeded from a `u64` and a stream index, so results are
//! identical across platforms and independent of thread scheduling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for stream `stream` of `seed`. Distinct streams never overlap.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fisher-Yates shuffle of `items`.
pub fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    items.shuffle(rng);
}

/// Stream ids reserved per consumer so that split, fold and tree streams
/// drawn from the same seed never coincide.
pub mod streams {
    pub const SPLIT: u64 = 1;
    pub const KFOLD: u64 = 2;
    pub const FOLD_BASE: u64 = 1 << 16;
    pub const TREE_BASE: u64 = 1 << 32;
}
