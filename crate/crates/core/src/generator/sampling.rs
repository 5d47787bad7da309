//! Intensity sampling strategies and per-sample seed derivation.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::TfrError;
use crate::layout::MAX_INTENSITY;

/// Sample set of a dataset. `Train` draws like `Test0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SetTag {
    Train,
    Test0,
    Test1,
    Test2,
    Test3,
    Test4,
    Test5,
}

impl SetTag {
    pub const ALL: [SetTag; 7] = [
        SetTag::Train,
        SetTag::Test0,
        SetTag::Test1,
        SetTag::Test2,
        SetTag::Test3,
        SetTag::Test4,
        SetTag::Test5,
    ];

    pub const TESTS: [SetTag; 6] = [
        SetTag::Test0,
        SetTag::Test1,
        SetTag::Test2,
        SetTag::Test3,
        SetTag::Test4,
        SetTag::Test5,
    ];

    pub fn id(self) -> u64 {
        self as u64
    }

    pub fn name(self) -> &'static str {
        match self {
            SetTag::Train => "Train",
            SetTag::Test0 => "Test0",
            SetTag::Test1 => "Test1",
            SetTag::Test2 => "Test2",
            SetTag::Test3 => "Test3",
            SetTag::Test4 => "Test4",
            SetTag::Test5 => "Test5",
        }
    }

    pub fn is_test(self) -> bool {
        self != SetTag::Train
    }

    /// Fraction of sources switched off for the zero-power strategies.
    fn zero_fraction(self) -> Option<f64> {
        match self {
            SetTag::Test2 => Some(0.25),
            SetTag::Test3 => Some(0.5),
            SetTag::Test4 => Some(0.75),
            _ => None,
        }
    }
}

impl fmt::Display for SetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SetTag {
    type Err = TfrError;

    fn from_str(s: &str) -> Result<Self, TfrError> {
        SetTag::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| TfrError::InvalidSpec(format!("unknown sample set `{s}`")))
    }
}

/// Number of zero-power sources for Test2/3/4, `round(Λ·frac)` with halves up.
pub fn zero_count(sources: usize, tag: SetTag) -> usize {
    tag.zero_fraction()
        .map_or(0, |frac| (sources as f64 * frac + 0.5).floor() as usize)
}

#[inline]
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sample `index` in set `tag`; depends only on its arguments.
pub fn sample_seed(base_seed: u64, tag: SetTag, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ tag.id()) ^ index)
}

/// Intensities (W/m^2) for `sources` components under strategy `tag`.
pub fn sample_powers(sources: usize, tag: SetTag, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| rng.random_range(0.0..=MAX_INTENSITY);
    match tag {
        SetTag::Train | SetTag::Test0 => (0..sources).map(|_| draw(&mut rng)).collect(),
        SetTag::Test1 => vec![draw(&mut rng); sources],
        SetTag::Test2 | SetTag::Test3 | SetTag::Test4 => {
            let zeros = zero_count(sources, tag).min(sources);
            let off = index::sample(&mut rng, sources, zeros);
            let mut q: Vec<f64> = (0..sources).map(|_| draw(&mut rng)).collect();
            for i in off.iter() {
                q[i] = 0.0;
            }
            q
        }
        SetTag::Test5 => {
            let mut q = vec![0.0; sources];
            let i = rng.random_range(0..sources);
            q[i] = draw(&mut rng);
            q
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_counts_round_half_up() {
        assert_eq!(zero_count(10, SetTag::Test2), 3);
        assert_eq!(zero_count(10, SetTag::Test3), 5);
        assert_eq!(zero_count(10, SetTag::Test4), 8);
        assert_eq!(zero_count(12, SetTag::Test2), 3);
        assert_eq!(zero_count(12, SetTag::Test3), 6);
        assert_eq!(zero_count(12, SetTag::Test4), 9);
        assert_eq!(zero_count(10, SetTag::Test0), 0);
    }

    #[test]
    fn same_intensity_for_test1() {
        let q = sample_powers(10, SetTag::Test1, 17);
        assert!(q.iter().all(|&v| v == q[0]));
    }

    #[test]
    fn single_active_source_for_test5() {
        let q = sample_powers(12, SetTag::Test5, 3);
        assert_eq!(q.iter().filter(|&&v| v == 0.0).count(), 11);
    }

    #[test]
    fn half_off_for_test3() {
        for seed in 0..50 {
            let q = sample_powers(10, SetTag::Test3, seed);
            assert_eq!(q.iter().filter(|&&v| v == 0.0).count(), 5);
        }
    }

    #[test]
    fn seeds_separate_sets_and_indices() {
        let a = sample_seed(1, SetTag::Test0, 0);
        assert_ne!(a, sample_seed(1, SetTag::Test1, 0));
        assert_ne!(a, sample_seed(1, SetTag::Test0, 1));
        assert_ne!(a, sample_seed(2, SetTag::Test0, 0));
        assert_eq!(a, sample_seed(1, SetTag::Test0, 0));
    }

    #[test]
    fn set_names_parse() {
        for tag in SetTag::ALL {
            assert_eq!(tag.name().parse::<SetTag>().unwrap(), tag);
        }
        assert!("Test9".parse::<SetTag>().is_err());
    }
}
