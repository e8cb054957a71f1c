//! Seed derivation.
//!
//! Every random draw in the crate is seeded from a pure function of
//! `(master seed, purpose, index)`, so a trial's outcome never depends on how
//! many other trials ran before it or on which thread ran it.
//!
//! The derivation is
//!
//! ```text
//! derive_seed(master, purpose, index)
//!     = mix64(mix64(master ^ mix64(purpose.tag())) ^ index)
//! ```
//!
//! where `mix64` is the SplitMix64 output function (add the golden-ratio
//! increment `0x9E3779B97F4A7C15`, then the two xor-shift-multiply rounds).
//! The derived 64-bit seed initialises a ChaCha8 stream via
//! [`rand::SeedableRng::seed_from_u64`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for all draws.
pub type SampleRng = ChaCha8Rng;

/// Distinguishes independent random streams that share a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Per-trial sampler seeds (empirical intervals, candidate sets).
    Trial,
    /// Synthetic pool generation inside the experiment harness.
    Population,
    /// Candidate sets drawn with simple random sampling.
    SrsCandidates,
    /// Candidate sets drawn with ranked set sampling.
    RssCandidates,
    /// Empirical interval runs inside the experiment harness.
    Interval,
}

impl Purpose {
    /// Fixed ASCII tags; changing one changes every derived stream for that purpose.
    pub const fn tag(self) -> u64 {
        match self {
            Purpose::Trial => u64::from_be_bytes(*b"trial\0\0\0"),
            Purpose::Population => u64::from_be_bytes(*b"populatn"),
            Purpose::SrsCandidates => u64::from_be_bytes(*b"srs-cand"),
            Purpose::RssCandidates => u64::from_be_bytes(*b"rss-cand"),
            Purpose::Interval => u64::from_be_bytes(*b"interval"),
        }
    }
}

/// SplitMix64 output function.
#[inline]
pub const fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub const fn derive_seed(master: u64, purpose: Purpose, index: u64) -> u64 {
    mix64(mix64(master ^ mix64(purpose.tag())) ^ index)
}

pub fn rng_from_seed(seed: u64) -> SampleRng {
    SampleRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn mix64_matches_reference_splitmix_outputs() {
        // First outputs of the reference SplitMix64 generator seeded with 0:
        // state advances by the increment before mixing.
        assert_eq!(mix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(mix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn derived_seeds_are_distinct_across_indices_and_purposes() {
        let mut seen = HashSet::new();
        for purpose in [
            Purpose::Trial,
            Purpose::Population,
            Purpose::SrsCandidates,
            Purpose::RssCandidates,
            Purpose::Interval,
        ] {
            for i in 0..10_000 {
                assert!(seen.insert(derive_seed(42, purpose, i)));
            }
        }
    }

    #[test]
    fn derivation_is_pure() {
        assert_eq!(
            derive_seed(7, Purpose::Trial, 3),
            derive_seed(7, Purpose::Trial, 3)
        );
        assert_ne!(
            derive_seed(7, Purpose::Trial, 3),
            derive_seed(8, Purpose::Trial, 3)
        );
    }
}
