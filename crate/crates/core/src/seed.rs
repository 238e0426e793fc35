//! Seed handling. Every random choice in the crate goes through a ChaCha8
//! stream seeded from an [`RngSeed`], and child seeds are derived with a
//! fixed SplitMix64 mix so serial and parallel runs agree bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Child seed for the given tag path.
    pub fn derive(self, tags: &[u64]) -> RngSeed {
        let mut state = splitmix64(self.0 ^ 0x5041_5254_5052_4f4d);
        for &tag in tags {
            state = splitmix64(state ^ splitmix64(tag.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        }
        RngSeed(state)
    }
}

impl From<u64> for RngSeed {
    fn from(v: u64) -> Self {
        RngSeed(v)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// Stable tags for derived seeds.
pub(crate) const TAG_POSITIVE: u64 = 1;
pub(crate) const TAG_NEGATIVE: u64 = 2;
pub(crate) const TAG_DISTANCE: u64 = 3;
pub(crate) const TAG_SUBSAMPLE_A: u64 = 4;
pub(crate) const TAG_SUBSAMPLE_B: u64 = 5;
pub(crate) const TAG_RESTART: u64 = 6;
pub(crate) const TAG_CANDIDATE: u64 = 7;
pub(crate) const TAG_SCENE: u64 = 8;
