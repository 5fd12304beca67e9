//! Deterministic, splittable random streams.
//!
//! A stream is named by `(seed, replica, index)`. The ChaCha key comes from the seed and
//! the replica, the stream word from the index, so every particle owns an independent
//! sequence no matter which thread evaluates it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub replica: u64,
    pub index: u64,
}

impl RngStream {
    pub fn new(seed: u64, replica: u64, index: u64) -> Self {
        RngStream {
            seed,
            replica,
            index,
        }
    }

    /// The stream for particle `index` of the same replica.
    pub fn particle(self, index: u64) -> Self {
        RngStream { index, ..self }
    }

    /// The generator for this stream, positioned at its first draw.
    pub fn rng(self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replica.to_le_bytes());
        key[16..24].copy_from_slice(b"lrm-rng1");
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.index);
        rng
    }
}
