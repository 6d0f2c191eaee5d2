//! Seeded random streams for reproducible replicas.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// The generator used throughout the crate.
///
/// ChaCha is counter based: a `(key, stream)` pair addresses an independent
/// sequence of 2^64 blocks, which is what replica derivation relies on.
pub type SimRng = ChaCha8Rng;

/// Identifies one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            stream_index: 0,
        }
    }

    pub fn with_stream(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Seed of replica `i` below this stream.
    ///
    /// The child key mixes both parent coordinates so that replicas of
    /// different parent streams never share a key.
    pub fn replica(&self, i: u64) -> RngSeed {
        RngSeed {
            seed: splitmix64(self.seed ^ splitmix64(self.stream_index.wrapping_add(0x5851_f42d))),
            stream_index: i,
        }
    }
}

impl Default for RngSeed {
    fn default() -> Self {
        Self::new(0x6d74_7068_6173_6531)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
