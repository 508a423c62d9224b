//! Named random streams derived from one root seed.
//!
//! Each consumer asks for its own stream by name, so adding a consumer never
//! shifts the draws seen by the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Seed for stream `name` under `root` (FNV-1a over the name, then a
/// SplitMix64 finalizer mixed with the root).
pub fn stream_seed(root: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix(root ^ splitmix(h))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream(root: u64, name: &str) -> StreamRng {
    ChaCha8Rng::seed_from_u64(stream_seed(root, name))
}
