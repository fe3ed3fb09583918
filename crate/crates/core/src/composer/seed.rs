//! Per-sample seeding.
//!
//! The seed of sample `i` is the `(i + 1)`-th output of a SplitMix64
//! generator started at `global_seed`. Each pipeline stage then draws from
//! its own ChaCha8 stream keyed by that seed, so stages never shift each
//! other's random sequences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Recorded in every manifest next to the seed.
pub const SEED_SCHEME: &str =
    "splitmix64(global_seed + 0x9e3779b97f4a7c15 * (index + 1)); stages: chacha8 stream per stage";

#[inline]
pub fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sample_seed(global_seed: u64, index: u64) -> u64 {
    splitmix64_mix(global_seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// Independent random streams within one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Base = 1,
    Donor = 2,
    Auxiliary = 3,
    Placement = 4,
}

pub fn stage_rng(sample_seed: u64, stage: Stage) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    rng.set_stream(stage as u64);
    rng
}

/// Zero-padded decimal id; sorts lexicographically in numeric order.
pub fn format_sample_id(index: u64) -> String {
    format!("{index:08}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn matches_reference_splitmix64_stream() {
        // Reference SplitMix64 outputs for state 0.
        let expected = [0xE220_A839_7B1D_CDAF_u64, 0x6E78_9E6A_A1B9_65F4, 0x06C4_5D18_8009_454F];
        for (i, e) in expected.iter().enumerate() {
            assert_eq!(sample_seed(0, i as u64), *e);
        }
    }

    #[test]
    fn stages_are_distinct_streams() {
        let mut a = stage_rng(42, Stage::Base);
        let mut b = stage_rng(42, Stage::Donor);
        assert_ne!(a.next_u64(), b.next_u64());
        let mut c = stage_rng(42, Stage::Base);
        let mut a2 = stage_rng(42, Stage::Base);
        assert_eq!(c.next_u64(), a2.next_u64());
    }

    #[test]
    fn ids_sort_numerically() {
        assert_eq!(format_sample_id(42), "00000042");
        assert!(format_sample_id(9) < format_sample_id(10));
    }
}
