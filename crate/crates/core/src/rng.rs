//! Seed derivation.
//!
//! Every stochastic step draws from its own ChaCha stream whose seed is a hash
//! of the run seed, a stream tag and an index. Work items can then be processed
//! in any order, on any number of threads, with identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags. Distinct tags keep unrelated draws independent.
pub mod stream {
    pub const SYNTH_SAMPLE: u64 = 0x5359_4e54;
    pub const TRAIN_INIT: u64 = 0x494e_4954;
    pub const STAGE_POOL: u64 = 0x504f_4f4c;
    pub const FERN: u64 = 0x4645_524e;
    pub const PREDICT: u64 = 0x5052_4544;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash `(seed, stream, index)` into a 64-bit sub-seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index)
}

pub fn rng_for(seed: u64, stream: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, stream, index))
}
