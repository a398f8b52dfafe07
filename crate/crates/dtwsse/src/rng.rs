//! Seeded stream derivation.
//!
//! All randomness in the crate flows through ChaCha streams derived from one
//! master seed, so independent pipeline stages (pair generation, weight
//! initialization, per-class sampling) never share or race on RNG state and
//! every run is reproducible bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id for synthetic pair generation during model training.
pub const STREAM_PAIRS: u64 = 1;
/// Stream id for network initialization and epoch shuffling.
pub const STREAM_TRAIN: u64 = 2;

/// A generator for stage `stream` of the run seeded by `seed`.
pub fn seed_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A per-class generator: the stream id is a stable hash of the label, so a
/// class draws the same values no matter which other classes exist.
pub fn label_stream(seed: u64, label: &str) -> ChaCha8Rng {
    seed_stream(seed, fnv1a(label.as_bytes()))
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike `Hasher`.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &byte in bytes {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
