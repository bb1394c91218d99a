//! Seed derivation shared by all generators.
//!
//! Generators never thread a single RNG through a loop; instead every
//! independently-generated object gets its own stream derived from
//! `(base seed, stream tags)`. That makes generation a pure function of the
//! config and trivially shardable: workers can produce any index range in any
//! order and the merged output is identical to the sequential one.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer. Small, well-mixed, and stable across platforms.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a stream tag.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}

/// Derives a child seed from a base seed and two stream tags
/// (typically a rule index and an example index).
pub fn derive_seed2(base: u64, a: u64, b: u64) -> u64 {
    derive_seed(derive_seed(base, a), b)
}

/// Deterministic RNG for one derived stream.
pub fn stream_rng(base: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream))
}

/// Deterministic RNG for one `(tag, tag)` derived stream.
pub fn stream_rng2(base: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed2(base, a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_seed_is_stable() {
        // Frozen values: seed derivation feeds every generator, so an
        // accidental change here would silently change all datasets.
        assert_eq!(splitmix64(0), 0xe220a8397b1dcdaf);
        assert_eq!(derive_seed(42, 0), derive_seed(42, 0));
        assert_ne!(derive_seed(42, 0), derive_seed(42, 1));
        assert_ne!(derive_seed(42, 0), derive_seed(43, 0));
    }

    #[test]
    fn streams_are_independent_of_order() {
        use rand::RngCore;
        let mut a1 = stream_rng2(7, 3, 1);
        let x = a1.next_u64();
        let mut b = stream_rng2(7, 0, 0);
        let _ = b.next_u64();
        let mut a2 = stream_rng2(7, 3, 1);
        assert_eq!(x, a2.next_u64());
    }
}
