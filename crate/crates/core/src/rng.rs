//! Seeded counter-based random streams.
//!
//! Every random decision in the crate draws from a ChaCha8 stream addressed
//! by `(seed, stream index)`, so results do not depend on evaluation order or
//! thread count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Domain tags keep seeds derived for different purposes independent.
pub(crate) mod domain {
    pub const PREFIX: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const GRAPH: u64 = 3;
    pub const MCMC: u64 = 4;
    pub const TASK_LABELS: u64 = 5;
    pub const TASK_SPLIT: u64 = 6;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Independent generator for stream `index` under `seed` and `domain`.
pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(GOLDEN));
    rng.set_stream(index);
    rng
}

/// Derives a child seed, e.g. the seed of task `index` in a batch.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    stream(seed, domain, index).next_u64()
}
