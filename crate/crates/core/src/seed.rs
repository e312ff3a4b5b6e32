//! Stable seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! 64-bit value; sub-streams are derived by hashing `(seed, stage)` so that
//! adding a stage never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Derive a child seed from a parent seed and a stage name.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((stage.len() as u64).to_le_bytes());
    h.update(stage.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("sha256 yields 32 bytes"))
}

pub fn rng_from_seed(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stage_rng(seed: u64, stage: &str) -> StreamRng {
    rng_from_seed(derive_seed(seed, stage))
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(7, "gen"), derive_seed(7, "gen"));
        assert_ne!(derive_seed(7, "gen"), derive_seed(7, "eval"));
        assert_ne!(derive_seed(7, "gen"), derive_seed(8, "gen"));
        // prefix collisions are excluded by the length prefix
        assert_ne!(derive_seed(1, "ab"), derive_seed(1, "a"));
    }

    #[test]
    fn stage_rng_reproducible() {
        let a: Vec<u32> = (0..4)
            .map(|_| 0)
            .scan(stage_rng(3, "x"), |r, _: u32| Some(r.gen()))
            .collect();
        let b: Vec<u32> = (0..4)
            .map(|_| 0)
            .scan(stage_rng(3, "x"), |r, _: u32| Some(r.gen()))
            .collect();
        assert_eq!(a, b);
    }
}
