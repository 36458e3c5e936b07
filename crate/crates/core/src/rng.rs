//! Splittable seeding.
//!
//! Every random stream is identified by a path of integers (dataset seed,
//! sequence index, purpose tag, ...). The path is folded through a
//! SplitMix64-style finalizer into a 64-bit key that seeds a ChaCha8 stream,
//! so any stream can be regenerated on its own, on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags keep streams for different consumers independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Scene = 1,
    Ood = 2,
    Tracker = 3,
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a path of integers into one 64-bit seed.
pub fn split_seed(root: u64, path: &[u64]) -> u64 {
    let mut acc = mix64(root.wrapping_add(0x9e37_79b9_7f4a_7c15));
    for (depth, &part) in path.iter().enumerate() {
        let salted = part.wrapping_add((depth as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        acc = mix64(acc ^ mix64(salted));
    }
    acc
}

/// Generator for stream `(root, sequence, purpose)`.
pub fn stream(root: u64, sequence: u64, purpose: Purpose) -> StreamRng {
    StreamRng::seed_from_u64(split_seed(root, &[sequence, purpose as u64]))
}

pub fn from_seed(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
