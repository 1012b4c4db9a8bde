//! Deterministic derivation of named RNG streams from one base seed.
//!
//! Every random choice in the pipeline draws from a [`ChaCha8Rng`] whose
//! seed is derived from `(base seed, label)`. Labels are short stable
//! strings such as `"model-init"` or `"utterance/train_spoof_0003"`, so
//! adding a new consumer never perturbs the streams of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives a child seed from `base` and a stream label.
///
/// The derivation hashes the little-endian bytes of `base` followed by the
/// label bytes with SHA-256 and takes the first eight bytes of the digest
/// as a little-endian `u64`. Distinct labels give statistically independent
/// streams; the same `(base, label)` pair always gives the same seed.
pub fn derive(base: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Returns a seeded RNG for the stream named `label` under `base`.
pub fn stream(base: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_inputs_same_seed() {
        assert_eq!(derive(7, "model-init"), derive(7, "model-init"));
    }

    #[test]
    fn different_labels_differ() {
        assert_ne!(derive(7, "model-init"), derive(7, "shuffle-1"));
    }

    #[test]
    fn different_bases_differ() {
        assert_ne!(derive(7, "model-init"), derive(8, "model-init"));
    }

    #[test]
    fn stream_is_reproducible() {
        let a: Vec<f64> = stream(3, "x").random_iter().take(8).collect();
        let b: Vec<f64> = stream(3, "x").random_iter().take(8).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn label_is_not_a_suffix_collision() {
        // (1, "ab") and (1, "a") with trailing byte moved into the base
        // must not collide because the base occupies a fixed-width prefix.
        assert_ne!(derive(1, "ab"), derive(1, "a"));
    }
}
