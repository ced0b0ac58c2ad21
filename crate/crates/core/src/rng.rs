//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream addressed by
//! `(seed, domain, index)`, so results never depend on the order in which
//! parallel workers pick up realisations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stream domains keep unrelated consumers of one master seed apart.
pub mod domain {
    pub const NOISE: u64 = 0x6e6f_6973;
    pub const PULSE: u64 = 0x7075_6c73;
    pub const DATASET: u64 = 0x6461_7461;
    pub const FOLDS: u64 = 0x666f_6c64;
    pub const FOREST: u64 = 0x666f_7273;
    pub const DERIVE: u64 = 0x6465_7269;
}

/// Address of one independent random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub seed: u64,
    pub index: u64,
}

impl StreamId {
    pub const fn new(seed: u64, index: u64) -> Self {
        Self { seed, index }
    }

    pub fn rng(&self, domain: u64) -> ChaCha8Rng {
        stream_rng(self.seed, domain, self.index)
    }
}

pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Derives a child master seed, e.g. one per pulse sequence or dataset record.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    // splitmix64 finaliser over a mixed input
    let mut z = seed
        ^ domain.rotate_left(29)
        ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ domain::DERIVE;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
