//! Deterministic randomness and content hashing.
//!
//! Every random decision in the crate flows from a single `u64` seed, fanned
//! out into *named substreams*: `substream(seed, "kmeans/restart3")` and
//! `substream(seed, "net/init")` yield independent ChaCha generators, so
//! modules can draw randomness in any order (or in parallel) without
//! perturbing each other. Renaming a stream — and nothing else — is what
//! changes its draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives an independent, reproducible RNG for the given seed and stream name.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(stream_key(seed, name))
}

/// Derives a plain `u64` sub-seed, for APIs that take a seed rather than an RNG.
pub fn derive_seed(seed: u64, name: &str) -> u64 {
    let key = stream_key(seed, name);
    u64::from_le_bytes(key[..8].try_into().expect("8 bytes"))
}

fn stream_key(seed: u64, name: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    // Separator keeps (seed, name) pairs unambiguous.
    hasher.update([0x1f]);
    hasher.update(name.as_bytes());
    hasher.finalize().into()
}

/// Hex SHA-256 of arbitrary bytes; used to fingerprint effective configs so
/// checkpoints record exactly which settings produced them.
pub fn content_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
