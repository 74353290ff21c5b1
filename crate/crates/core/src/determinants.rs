//! Occupation-bitmask configurations and the excitation primitives used by
//! the Slater–Condon kernels.
//!
//! Bit layout of a measured bitstring: the first `n_orbitals` positions are
//! the alpha block and the remaining `n_orbitals` the beta block. Within a
//! block, position `i` is spatial orbital `i`. In text form position 0 is the
//! leftmost character, so `"1010"` with two orbitals is alpha `{0}`, beta
//! `{0}`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::integrals::MAX_ORBITALS;

/// Default cap on the size of an enumerated configuration space.
pub const DEFAULT_SPACE_CAP: u128 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DeterminantError {
    #[error("bitstring length {found} does not match 2 x {n_orbitals} orbitals")]
    LengthMismatch { found: usize, n_orbitals: usize },
    #[error("invalid character {0:?} in bitstring")]
    InvalidBit(char),
    #[error("{n_orbitals} orbitals exceeds the supported maximum of {MAX_ORBITALS}")]
    WidthTooLarge { n_orbitals: usize },
    #[error("hole orbital {0} is not occupied")]
    HoleNotOccupied(SpinOrbital),
    #[error("particle orbital {0} is already occupied")]
    ParticleOccupied(SpinOrbital),
    #[error("hole {hole} and particle {particle} have different spin")]
    SpinMismatch {
        hole: SpinOrbital,
        particle: SpinOrbital,
    },
    #[error("configuration space of {size} exceeds the cap of {cap}")]
    SpaceTooLarge { size: u128, cap: u128 },
    #[error("cannot place {n_electrons} electrons in {n_orbitals} orbitals")]
    TooManyElectrons { n_electrons: usize, n_orbitals: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Spin {
    Alpha,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpinOrbital {
    pub orbital: usize,
    pub spin: Spin,
}

impl SpinOrbital {
    pub fn alpha(orbital: usize) -> Self {
        Self {
            orbital,
            spin: Spin::Alpha,
        }
    }

    pub fn beta(orbital: usize) -> Self {
        Self {
            orbital,
            spin: Spin::Beta,
        }
    }
}

impl fmt::Display for SpinOrbital {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.spin {
            Spin::Alpha => "a",
            Spin::Beta => "b",
        };
        write!(f, "{}{}", self.orbital, s)
    }
}

/// A determinant label: alpha and beta occupation masks over spatial
/// orbitals. Ordered alpha-mask-major, then beta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Configuration {
    pub alpha: u64,
    pub beta: u64,
}

impl Configuration {
    pub fn new(alpha: u64, beta: u64) -> Self {
        Self { alpha, beta }
    }

    /// Build from explicit occupied-orbital lists.
    pub fn from_occupations(alpha: &[usize], beta: &[usize]) -> Self {
        let mask = |occ: &[usize]| occ.iter().fold(0u64, |m, &i| m | (1 << i));
        Self::new(mask(alpha), mask(beta))
    }

    pub fn mask(&self, spin: Spin) -> u64 {
        match spin {
            Spin::Alpha => self.alpha,
            Spin::Beta => self.beta,
        }
    }

    pub fn n_alpha(&self) -> usize {
        self.alpha.count_ones() as usize
    }

    pub fn n_beta(&self) -> usize {
        self.beta.count_ones() as usize
    }

    pub fn is_valid_for(&self, n_alpha: usize, n_beta: usize) -> bool {
        self.n_alpha() == n_alpha && self.n_beta() == n_beta
    }

    pub fn is_occupied(&self, so: SpinOrbital) -> bool {
        self.mask(so.spin) >> so.orbital & 1 == 1
    }

    /// Occupied spatial orbitals of one spin, ascending.
    pub fn occupied(&self, spin: Spin) -> impl Iterator<Item = usize> {
        bits(self.mask(spin))
    }

    /// Encode into the measurement bit layout.
    pub fn to_bitstring(&self, n_orbitals: usize) -> Bitstring {
        let bits = self.alpha as u128 | (self.beta as u128) << n_orbitals;
        Bitstring {
            bits,
            len: 2 * n_orbitals,
        }
    }

    fn with_mask(self, spin: Spin, mask: u64) -> Self {
        match spin {
            Spin::Alpha => Self { alpha: mask, ..self },
            Spin::Beta => Self { beta: mask, ..self },
        }
    }
}

/// Ascending indices of set bits.
pub fn bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let i = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(i)
        }
    })
}

/// A measured bit pattern of length `2 * n_orbitals`. Position `i` of the
/// string is bit `i` of `bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bitstring {
    bits: u128,
    len: usize,
}

impl Bitstring {
    pub fn from_bits(bits: u128, len: usize) -> Self {
        debug_assert!(len <= 128);
        let mask = if len == 128 { u128::MAX } else { (1u128 << len) - 1 };
        Self {
            bits: bits & mask,
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bits(&self) -> u128 {
        self.bits
    }

    pub fn bit(&self, position: usize) -> bool {
        self.bits >> position & 1 == 1
    }

    pub fn flip(&mut self, position: usize) {
        self.bits ^= 1 << position;
    }

    /// Exchange the first and second halves (beta-first <-> alpha-first).
    pub fn swap_blocks(&self) -> Self {
        let half = self.len / 2;
        let lo_mask = (1u128 << half) - 1;
        let lo = self.bits & lo_mask;
        let hi = self.bits >> half;
        Self::from_bits(hi | lo << half, self.len)
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.bit(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Bitstring {
    type Err = DeterminantError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() > 2 * MAX_ORBITALS {
            return Err(DeterminantError::WidthTooLarge {
                n_orbitals: s.len() / 2,
            });
        }
        let mut bits = 0u128;
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << i,
                other => return Err(DeterminantError::InvalidBit(other)),
            }
        }
        Ok(Self { bits, len: s.len() })
    }
}

/// A bitstring with its shot multiplicity. May violate particle number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RawBitstring {
    pub bits: Bitstring,
    pub count: u64,
}

/// Decode a raw bitstring into a configuration, without a validity check.
pub fn from_raw(bits: &Bitstring, n_orbitals: usize) -> Result<Configuration, DeterminantError> {
    if n_orbitals > MAX_ORBITALS {
        return Err(DeterminantError::WidthTooLarge { n_orbitals });
    }
    if bits.len() != 2 * n_orbitals {
        return Err(DeterminantError::LengthMismatch {
            found: bits.len(),
            n_orbitals,
        });
    }
    let mask = if n_orbitals == 64 {
        u64::MAX as u128
    } else {
        (1u128 << n_orbitals) - 1
    };
    Ok(Configuration {
        alpha: (bits.bits() & mask) as u64,
        beta: (bits.bits() >> n_orbitals & mask) as u64,
    })
}

/// `(d_alpha, d_beta)`: number of electrons moved in each spin channel.
pub fn excitation_degree(a: &Configuration, b: &Configuration) -> (usize, usize) {
    (
        ((a.alpha ^ b.alpha).count_ones() / 2) as usize,
        ((a.beta ^ b.beta).count_ones() / 2) as usize,
    )
}

/// Mask of orbitals strictly between `i` and `j`.
#[inline]
fn between_mask(i: usize, j: usize) -> u64 {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    if hi - lo <= 1 {
        return 0;
    }
    let upper = if hi == 64 { u64::MAX } else { (1u64 << hi) - 1 };
    upper & !((1u64 << (lo + 1)) - 1)
}

/// Sign of moving one electron `hole -> particle` within a single-spin mask.
#[inline]
pub(crate) fn phase_in_mask(mask: u64, hole: usize, particle: usize) -> f64 {
    if (mask & between_mask(hole, particle)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Fermionic sign of `a†_particle a_hole` acting on `from`:
/// `(-1)^k`, `k` the number of occupied same-spin orbitals strictly between.
pub fn excitation_phase(
    from: &Configuration,
    hole: SpinOrbital,
    particle: SpinOrbital,
) -> Result<f64, DeterminantError> {
    if hole.spin != particle.spin {
        return Err(DeterminantError::SpinMismatch { hole, particle });
    }
    if !from.is_occupied(hole) {
        return Err(DeterminantError::HoleNotOccupied(hole));
    }
    if from.is_occupied(particle) {
        return Err(DeterminantError::ParticleOccupied(particle));
    }
    Ok(phase_in_mask(from.mask(hole.spin), hole.orbital, particle.orbital))
}

/// Apply a single excitation, returning the new configuration and its sign.
pub fn apply_excitation(
    from: &Configuration,
    hole: SpinOrbital,
    particle: SpinOrbital,
) -> Result<(Configuration, f64), DeterminantError> {
    let phase = excitation_phase(from, hole, particle)?;
    let spin = hole.spin;
    let mask = from.mask(spin) & !(1 << hole.orbital) | 1 << particle.orbital;
    Ok((from.with_mask(spin, mask), phase))
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// All `k`-subsets of `n` orbitals as masks, ascending.
pub fn combinations(n: usize, k: usize) -> Vec<u64> {
    if k > n {
        return Vec::new();
    }
    if k == 0 {
        return vec![0];
    }
    let mut out = Vec::with_capacity(binomial(n, k) as usize);
    let limit: u128 = 1u128 << n;
    let mut v: u128 = (1u128 << k) - 1;
    while v < limit {
        out.push(v as u64);
        // Gosper's hack: next larger integer with the same popcount.
        let c = v & v.wrapping_neg();
        let r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    out
}

/// The full configuration space for `(n_alpha, n_beta)` electrons in
/// canonical order, using [`DEFAULT_SPACE_CAP`].
pub fn enumerate_full_space(
    n_orbitals: usize,
    n_alpha: usize,
    n_beta: usize,
) -> Result<Vec<Configuration>, DeterminantError> {
    enumerate_full_space_capped(n_orbitals, n_alpha, n_beta, DEFAULT_SPACE_CAP)
}

pub fn full_space_size(n_orbitals: usize, n_alpha: usize, n_beta: usize) -> u128 {
    binomial(n_orbitals, n_alpha) * binomial(n_orbitals, n_beta)
}

pub fn enumerate_full_space_capped(
    n_orbitals: usize,
    n_alpha: usize,
    n_beta: usize,
    cap: u128,
) -> Result<Vec<Configuration>, DeterminantError> {
    if n_orbitals > MAX_ORBITALS {
        return Err(DeterminantError::WidthTooLarge { n_orbitals });
    }
    for n in [n_alpha, n_beta] {
        if n > n_orbitals {
            return Err(DeterminantError::TooManyElectrons {
                n_electrons: n,
                n_orbitals,
            });
        }
    }
    let size = full_space_size(n_orbitals, n_alpha, n_beta);
    if size > cap {
        return Err(DeterminantError::SpaceTooLarge { size, cap });
    }
    let alphas = combinations(n_orbitals, n_alpha);
    let betas = combinations(n_orbitals, n_beta);
    let mut out = Vec::with_capacity(size as usize);
    for &a in &alphas {
        out.extend(betas.iter().map(|&b| Configuration::new(a, b)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn set(mask: u64) -> BTreeSet<usize> {
        bits(mask).collect()
    }

    #[test]
    fn layout_definition() {
        let c = from_raw(&"1010".parse().unwrap(), 2).unwrap();
        assert_eq!(set(c.alpha), BTreeSet::from([0]));
        assert_eq!(set(c.beta), BTreeSet::from([0]));

        let c = from_raw(&"0000".parse().unwrap(), 2).unwrap();
        assert_eq!(c, Configuration::default());

        let c = from_raw(&"111100".parse().unwrap(), 3).unwrap();
        assert_eq!(set(c.alpha), BTreeSet::from([0, 1, 2]));
        assert_eq!(set(c.beta), BTreeSet::from([0]));
        assert!(c.is_valid_for(3, 1));
        assert!(!c.is_valid_for(2, 2));
    }

    #[test]
    fn length_mismatch() {
        let err = from_raw(&"101".parse().unwrap(), 2).unwrap_err();
        assert_eq!(
            err,
            DeterminantError::LengthMismatch {
                found: 3,
                n_orbitals: 2
            }
        );
        assert!("10x1".parse::<Bitstring>().is_err());
    }

    #[test]
    fn degree_examples() {
        let a = Configuration::from_occupations(&[0, 1], &[0]);
        let b = Configuration::from_occupations(&[0, 2], &[0]);
        assert_eq!(excitation_degree(&a, &a), (0, 0));
        assert_eq!(excitation_degree(&a, &b), (1, 0));
    }

    #[test]
    fn phase_examples() {
        let c = Configuration::from_occupations(&[0, 1], &[]);
        assert_eq!(
            excitation_phase(&c, SpinOrbital::alpha(0), SpinOrbital::alpha(2)).unwrap(),
            -1.0
        );
        let c = Configuration::from_occupations(&[0], &[]);
        assert_eq!(
            excitation_phase(&c, SpinOrbital::alpha(0), SpinOrbital::alpha(3)).unwrap(),
            1.0
        );
        assert_eq!(
            excitation_phase(&c, SpinOrbital::alpha(1), SpinOrbital::alpha(3)),
            Err(DeterminantError::HoleNotOccupied(SpinOrbital::alpha(1)))
        );
        let c = Configuration::from_occupations(&[0, 3], &[]);
        assert_eq!(
            excitation_phase(&c, SpinOrbital::alpha(0), SpinOrbital::alpha(3)),
            Err(DeterminantError::ParticleOccupied(SpinOrbital::alpha(3)))
        );
        assert!(matches!(
            excitation_phase(&c, SpinOrbital::alpha(0), SpinOrbital::beta(1)),
            Err(DeterminantError::SpinMismatch { .. })
        ));
    }

    #[test]
    fn phase_matches_anticommutation_count() {
        // Operator-string oracle: a†_q a_p |occ ascending>, count transpositions
        // needed to bring a_p to its partner and then a†_q into sorted position.
        fn oracle(occ: &[usize], p: usize, q: usize) -> f64 {
            let pos = occ.iter().position(|&o| o == p).unwrap();
            let mut sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
            let rest: Vec<usize> = occ.iter().copied().filter(|&o| o != p).collect();
            let pos_q = rest.iter().filter(|&&o| o < q).count();
            if pos_q % 2 == 1 {
                sign = -sign;
            }
            sign
        }
        for mask in 0u64..256 {
            let c = Configuration::new(mask, 0);
            let occ: Vec<usize> = bits(mask).collect();
            for &p in &occ {
                for q in (0..8).filter(|q| mask >> q & 1 == 0) {
                    let phase =
                        excitation_phase(&c, SpinOrbital::alpha(p), SpinOrbital::alpha(q)).unwrap();
                    assert_eq!(phase, oracle(&occ, p, q), "mask {mask:b} {p}->{q}");
                }
            }
        }
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_full_space(10, 5, 5).unwrap().len(), 63_504);
        assert_eq!(enumerate_full_space(2, 1, 1).unwrap().len(), 4);

        // Nested-loop oracle for (4,2,2).
        let mut oracle = Vec::new();
        for a in 0u64..16 {
            for b in 0u64..16 {
                if a.count_ones() == 2 && b.count_ones() == 2 {
                    oracle.push(Configuration::new(a, b));
                }
            }
        }
        assert_eq!(enumerate_full_space(4, 2, 2).unwrap(), oracle);
        assert_eq!(oracle.len(), 36);
    }

    #[test]
    fn enumeration_cap_and_bounds() {
        assert!(matches!(
            enumerate_full_space_capped(10, 5, 5, 1000),
            Err(DeterminantError::SpaceTooLarge { size: 63_504, cap: 1000 })
        ));
        assert!(enumerate_full_space(3, 4, 1).is_err());
        assert_eq!(enumerate_full_space(3, 0, 0).unwrap(), vec![Configuration::default()]);
    }

    #[test]
    fn enumeration_exhaustive_small() {
        for n in 0..=6 {
            for na in 0..=n {
                for nb in 0..=n {
                    let space = enumerate_full_space(n, na, nb).unwrap();
                    assert_eq!(space.len() as u128, binomial(n, na) * binomial(n, nb));
                    assert!(space.windows(2).all(|w| w[0] < w[1]));
                    assert!(space.iter().all(|c| c.is_valid_for(na, nb)));
                }
            }
        }
    }

    #[test]
    fn block_swap() {
        let b: Bitstring = "110001".parse().unwrap();
        assert_eq!(b.swap_blocks().to_string(), "001110");
        assert_eq!(b.swap_blocks().swap_blocks(), b);
    }

    proptest! {
        #[test]
        fn raw_round_trip(alpha in 0u64..(1 << 10), beta in 0u64..(1 << 10)) {
            let c = Configuration::new(alpha, beta);
            let b = c.to_bitstring(10);
            prop_assert_eq!(b.len(), 20);
            prop_assert_eq!(from_raw(&b, 10).unwrap(), c);
            let parsed: Bitstring = b.to_string().parse().unwrap();
            prop_assert_eq!(parsed, b);
        }

        #[test]
        fn degree_matches_set_difference(k in 0usize..=8, l in 0usize..=8, seed in proptest::array::uniform4(0usize..1000)) {
            let ka = combinations(8, k);
            let kb = combinations(8, l);
            let x = Configuration::new(ka[seed[0] % ka.len()], kb[seed[1] % kb.len()]);
            let y = Configuration::new(ka[seed[2] % ka.len()], kb[seed[3] % kb.len()]);
            let da = set(x.alpha).difference(&set(y.alpha)).count();
            let db = set(x.beta).difference(&set(y.beta)).count();
            prop_assert_eq!(excitation_degree(&x, &y), (da, db));
            prop_assert_eq!(excitation_degree(&y, &x), (da, db));
        }

        #[test]
        fn degree_triangle(k in 0usize..=8, seed in proptest::array::uniform3(0usize..1000)) {
            let masks = combinations(8, k);
            let [x, y, z] = seed.map(|s| Configuration::new(masks[s % masks.len()], 0));
            prop_assert!(excitation_degree(&x, &z).0 <= excitation_degree(&x, &y).0 + excitation_degree(&y, &z).0);
        }
    }
}
