//! Stable seed derivation.
//!
//! Every random stream in the pipeline is a ChaCha8 generator keyed by
//! `derive_seed(parent, label, index)`. The function is FNV-1a over the label
//! folded into a SplitMix64 finalizer, so it is stable across platforms and
//! Rust releases, and adding a new label never perturbs existing streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, label: &str, index: u64) -> u64 {
    let mut h = FNV_OFFSET;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(splitmix64(parent ^ h).wrapping_add(index))
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derive_rng(parent: u64, label: &str, index: u64) -> Rng {
    rng_from(derive_seed(parent, label, index))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_label_sensitive() {
        // Frozen value: changing the mixing function would silently reshuffle
        // every stored experiment.
        assert_eq!(derive_seed(0, "", 0), splitmix64(splitmix64(FNV_OFFSET)));
        assert_ne!(derive_seed(1, "study1", 0), derive_seed(1, "study2", 0));
        assert_ne!(derive_seed(1, "study1", 0), derive_seed(1, "study1", 1));
        assert_eq!(derive_seed(7, "x", 3), derive_seed(7, "x", 3));
    }
}
