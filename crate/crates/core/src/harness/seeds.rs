//! Named random streams derived from one master seed.
//!
//! Test drops depend only on the master seed and the episode index, so every
//! allocator and payload is scored on the same topologies and fading.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TRAINING: u64 = 1;
pub const TEST_EPISODE: u64 = 2;
pub const RANDOM_POLICY: u64 = 3;
pub const GREEDY_POLICY: u64 = 4;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, part| {
        splitmix64(acc.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ part)
    })
}

pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
