//! Deterministic random streams.
//!
//! Every generator in the crate draws from [`SeededRng`], a ChaCha8 stream
//! keyed by a 64-bit seed. ChaCha output is specified bit-for-bit, so the
//! same seed produces the same datasets on every platform. Never swap this
//! for `thread_rng` or `StdRng`: the latter is allowed to change algorithm
//! between `rand` releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The crate-wide portable generator.
pub type SeededRng = ChaCha8Rng;

/// Opens the deterministic stream for `seed`.
pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a child seed for an independent sub-stream (e.g. one per named subset).
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest has 32 bytes"))
}
