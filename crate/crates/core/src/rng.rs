//! Seed derivation.
//!
//! All randomness flows from one 64-bit seed. A stage (or an episode, or a
//! sample) gets its own stream by hashing the parent seed with a label:
//! `seed' = first 8 bytes (LE) of SHA-256(parent_le || label)`. Streams are
//! ChaCha8, which is portable and stable across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn derive_seed(parent: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(parent.to_le_bytes());
    h.update(label.as_bytes());
    let out = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&out[..8]);
    u64::from_le_bytes(b)
}

pub fn derive_indexed(parent: u64, label: &str, index: u64) -> u64 {
    derive_seed(parent, &format!("{label}/{index}"))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
