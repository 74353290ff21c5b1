//! Self-consistent configuration recovery.
//!
//! A bitstring with the wrong electron count in a spin block is repaired
//! against the average orbital occupations of the current subspace
//! wavefunction. Each excess electron is removed from an occupied orbital
//! chosen with probability proportional to `(1 - occ[i]) + EPSILON`; each
//! missing electron is added to an empty orbital chosen with probability
//! proportional to `occ[i] + EPSILON`. Blocks are repaired independently,
//! alpha first.
//!
//! Shot `k` of a sample set is repaired on the stream seeded with
//! `derive_seed(seed, k)`, where shots are numbered in canonical sample
//! order. The output is therefore independent of execution order.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::determinants::{bits, from_raw, Bitstring, Configuration, DeterminantError};
use crate::rng::{self, derive_seed};
use crate::sampling::SampleSet;

/// Probability floor keeping every candidate orbital selectable.
pub const EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoveryError {
    #[error("weights have no magnitude")]
    ZeroWeightVector,
    #[error("{weights} weights for {basis} configurations")]
    LengthMismatch { basis: usize, weights: usize },
    #[error("profile covers {profile} orbitals but the bitstring has {bitstring}")]
    ProfileWidthMismatch { profile: usize, bitstring: usize },
    #[error("{n_electrons} electrons do not fit in {n_orbitals} orbitals")]
    TooManyElectrons { n_electrons: usize, n_orbitals: usize },
    #[error(transparent)]
    Determinant(#[from] DeterminantError),
}

/// Mean per-orbital occupations of each spin.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationProfile {
    pub alpha_occ: Vec<f64>,
    pub beta_occ: Vec<f64>,
}

impl OccupationProfile {
    /// Least-informative profile: `n_spin / n_orbitals` everywhere.
    pub fn uniform(n_orbitals: usize, n_alpha: usize, n_beta: usize) -> Self {
        let fill = |n: usize| {
            if n_orbitals == 0 {
                Vec::new()
            } else {
                vec![n as f64 / n_orbitals as f64; n_orbitals]
            }
        };
        Self {
            alpha_occ: fill(n_alpha),
            beta_occ: fill(n_beta),
        }
    }

    pub fn n_orbitals(&self) -> usize {
        self.alpha_occ.len()
    }
}

/// Occupations weighted by squared CI coefficients.
pub fn occupation_profile(
    basis: &[Configuration],
    weights: &[f64],
    n_orbitals: usize,
) -> Result<OccupationProfile, RecoveryError> {
    if basis.len() != weights.len() {
        return Err(RecoveryError::LengthMismatch {
            basis: basis.len(),
            weights: weights.len(),
        });
    }
    let norm: f64 = weights.iter().map(|w| w * w).sum();
    if !(norm > 0.0) {
        return Err(RecoveryError::ZeroWeightVector);
    }
    let mut alpha_occ = vec![0.0; n_orbitals];
    let mut beta_occ = vec![0.0; n_orbitals];
    for (c, w) in basis.iter().zip(weights) {
        let p = w * w / norm;
        for i in bits(c.alpha) {
            alpha_occ[i] += p;
        }
        for i in bits(c.beta) {
            beta_occ[i] += p;
        }
    }
    for v in alpha_occ.iter_mut().chain(beta_occ.iter_mut()) {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(OccupationProfile {
        alpha_occ,
        beta_occ,
    })
}

fn pick_weighted<R: Rng>(candidates: &[(usize, f64)], rng: &mut R) -> usize {
    let total: f64 = candidates.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for &(i, w) in candidates {
        if u < w {
            return i;
        }
        u -= w;
    }
    candidates.last().expect("non-empty candidate list").0
}

fn repair_block<R: Rng>(mut mask: u64, target: usize, occ: &[f64], rng: &mut R) -> u64 {
    let n = occ.len();
    while (mask.count_ones() as usize) > target {
        let candidates: Vec<(usize, f64)> = bits(mask).map(|i| (i, 1.0 - occ[i] + EPSILON)).collect();
        mask &= !(1 << pick_weighted(&candidates, rng));
    }
    while (mask.count_ones() as usize) < target {
        let candidates: Vec<(usize, f64)> = (0..n)
            .filter(|&i| mask >> i & 1 == 0)
            .map(|i| (i, occ[i] + EPSILON))
            .collect();
        mask |= 1 << pick_weighted(&candidates, rng);
    }
    mask
}

/// Repair one bitstring so it is valid for `(n_alpha, n_beta)`. Valid
/// input is returned unchanged without consuming randomness.
pub fn recover(
    raw: &Bitstring,
    profile: &OccupationProfile,
    n_alpha: usize,
    n_beta: usize,
    seed: u64,
) -> Result<Configuration, RecoveryError> {
    let n = profile.n_orbitals();
    if raw.len() != 2 * n || profile.beta_occ.len() != n {
        return Err(RecoveryError::ProfileWidthMismatch {
            profile: n,
            bitstring: raw.len() / 2,
        });
    }
    for e in [n_alpha, n_beta] {
        if e > n {
            return Err(RecoveryError::TooManyElectrons {
                n_electrons: e,
                n_orbitals: n,
            });
        }
    }
    let c = from_raw(raw, n)?;
    if c.is_valid_for(n_alpha, n_beta) {
        return Ok(c);
    }
    let mut stream = rng::stream(seed);
    let alpha = repair_block(c.alpha, n_alpha, &profile.alpha_occ, &mut stream);
    let beta = repair_block(c.beta, n_beta, &profile.beta_occ, &mut stream);
    Ok(Configuration::new(alpha, beta))
}

/// Repair every shot of `s` independently. Returns one configuration per
/// shot in canonical shot order.
pub fn repair_sample_set(
    s: &SampleSet,
    profile: &OccupationProfile,
    n_alpha: usize,
    n_beta: usize,
    seed: u64,
) -> Result<Vec<Configuration>, RecoveryError> {
    let shots = s.expand();
    shots
        .par_iter()
        .enumerate()
        .map(|(k, b)| recover(b, profile, n_alpha, n_beta, derive_seed(seed, k as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::SampleSource;

    fn bs(s: &str) -> Bitstring {
        s.parse().unwrap()
    }

    #[test]
    fn single_configuration_profile() {
        let c = Configuration::from_occupations(&[0, 2], &[1]);
        let p = occupation_profile(&[c], &[1.0], 3).unwrap();
        assert_eq!(p.alpha_occ, vec![1.0, 0.0, 1.0]);
        assert_eq!(p.beta_occ, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn equal_weights_half_occupation() {
        let a = Configuration::from_occupations(&[0], &[1]);
        let b = Configuration::from_occupations(&[1], &[1]);
        let p = occupation_profile(&[a, b], &[0.3, -0.3], 2).unwrap();
        assert!((p.alpha_occ[0] - 0.5).abs() < 1e-15);
        assert!((p.beta_occ[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn profile_errors() {
        let a = Configuration::from_occupations(&[0], &[1]);
        assert_eq!(
            occupation_profile(&[a], &[0.0], 2),
            Err(RecoveryError::ZeroWeightVector)
        );
        assert!(matches!(
            occupation_profile(&[a], &[1.0, 2.0], 2),
            Err(RecoveryError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn profile_sums_to_electron_counts() {
        let space = crate::determinants::enumerate_full_space(5, 2, 3).unwrap();
        let weights: Vec<f64> = (0..space.len()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let p = occupation_profile(&space, &weights, 5).unwrap();
        assert!((p.alpha_occ.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!((p.beta_occ.iter().sum::<f64>() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn valid_input_is_untouched() {
        let p = OccupationProfile::uniform(3, 2, 1);
        let raw = bs("110010");
        let c = recover(&raw, &p, 2, 1, 99).unwrap();
        assert_eq!(c, from_raw(&raw, 3).unwrap());
    }

    #[test]
    fn excess_electron_removed_from_empty_orbital() {
        let n = 6;
        let j = 4;
        let mut occ = vec![1.0; n];
        occ[j] = 0.0;
        let profile = OccupationProfile {
            alpha_occ: occ,
            beta_occ: vec![0.5; n],
        };
        // alpha {0,1,2,4}: one more than the target of 3
        let raw = Configuration::from_occupations(&[0, 1, 2, 4], &[0, 1, 2]).to_bitstring(n);
        let removed_j = (0..1000)
            .filter(|&seed| {
                let c = recover(&raw, &profile, 3, 3, seed).unwrap();
                c.alpha >> j & 1 == 0
            })
            .count();
        assert!(removed_j >= 995, "orbital {j} removed in {removed_j}/1000 trials");
    }

    #[test]
    fn missing_electron_added_to_occupied_orbital() {
        let n = 4;
        let profile = OccupationProfile {
            alpha_occ: vec![1.0, 0.0, 0.0, 1.0],
            beta_occ: vec![0.5; n],
        };
        let raw = Configuration::from_occupations(&[0], &[0, 1]).to_bitstring(n);
        let c = recover(&raw, &profile, 2, 2, 3).unwrap();
        assert_eq!(c.alpha, 0b1001);
    }

    #[test]
    fn width_mismatch() {
        let p = OccupationProfile::uniform(3, 1, 1);
        assert!(matches!(
            recover(&bs("1010"), &p, 1, 1, 0),
            Err(RecoveryError::ProfileWidthMismatch { .. })
        ));
    }

    #[test]
    fn count_expansion() {
        let s = SampleSet::from_counts(3, [(bs("111000"), 100)], SampleSource::File, None).unwrap();
        let p = OccupationProfile::uniform(3, 1, 1);
        let out = repair_sample_set(&s, &p, 1, 1, 5).unwrap();
        assert_eq!(out.len(), 100);
        assert!(out.iter().all(|c| c.is_valid_for(1, 1)));
        let distinct: std::collections::BTreeSet<_> = out.iter().collect();
        assert!(distinct.len() > 1, "independent repairs should differ");
    }

    #[test]
    fn all_valid_pass_through() {
        let s = SampleSet::from_counts(2, [(bs("1001"), 2), (bs("0110"), 1)], SampleSource::File, None).unwrap();
        let p = OccupationProfile::uniform(2, 1, 1);
        let out = repair_sample_set(&s, &p, 1, 1, 0).unwrap();
        let decoded: Vec<Configuration> = s.expand().iter().map(|b| from_raw(b, 2).unwrap()).collect();
        assert_eq!(out, decoded);
    }

    proptest::proptest! {
        #[test]
        fn output_always_valid(raw in 0u128..(1 << 12), na in 0usize..=6, nb in 0usize..=6, seed in 0u64..u64::MAX,
                               occ in proptest::collection::vec(0.0f64..=1.0, 12)) {
            let profile = OccupationProfile { alpha_occ: occ[..6].to_vec(), beta_occ: occ[6..].to_vec() };
            let b = Bitstring::from_bits(raw, 12);
            let c = recover(&b, &profile, na, nb, seed).unwrap();
            proptest::prop_assert!(c.is_valid_for(na, nb));
            proptest::prop_assert_eq!(recover(&b, &profile, na, nb, seed).unwrap(), c);
        }
    }
}
