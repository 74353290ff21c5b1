//! Measurement-style samples: counts-file ingestion and synthetic sampling
//! from a trial state with an independent bit-flip channel.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::determinants::{Bitstring, Configuration, DeterminantError, RawBitstring};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("line {line}: bitstring length {found} does not match 2 x {n_orbitals} orbitals")]
    LengthMismatch {
        line: usize,
        found: usize,
        n_orbitals: usize,
    },
    #[error("line {line}: count must be a positive integer")]
    NonPositiveCount { line: usize },
    #[error("line {line}: expected \"<bitstring> <count>\": {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("counts file contains no samples")]
    EmptyFile,
    #[error("trial state has no weight")]
    ZeroStateVector,
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("flip probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("sample width {found} does not match {expected} orbitals")]
    WidthMismatch { found: usize, expected: usize },
    #[error(transparent)]
    Determinant(#[from] DeterminantError),
}

/// Order of the spin blocks in a counts-file bitstring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endianness {
    #[default]
    AlphaFirst,
    BetaFirst,
}

impl fmt::Display for Endianness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::AlphaFirst => "alpha-first",
            Self::BetaFirst => "beta-first",
        })
    }
}

impl FromStr for Endianness {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alpha-first" => Ok(Self::AlphaFirst),
            "beta-first" => Ok(Self::BetaFirst),
            other => Err(format!(
                "unknown endianness {other:?} (expected alpha-first or beta-first)"
            )),
        }
    }
}

impl Endianness {
    /// Convert between file order and the internal alpha-first layout.
    fn convert(self, b: Bitstring) -> Bitstring {
        match self {
            Self::AlphaFirst => b,
            Self::BetaFirst => b.swap_blocks(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleSource {
    File,
    Synthetic,
}

/// A multiset of raw bitstrings. Entries are unique and sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    n_orbitals: usize,
    samples: Vec<RawBitstring>,
    total_shots: u64,
    pub source: SampleSource,
    pub seed: Option<u64>,
}

impl SampleSet {
    /// Merge `(bitstring, count)` pairs; duplicate bitstrings add up.
    pub fn from_counts(
        n_orbitals: usize,
        counts: impl IntoIterator<Item = (Bitstring, u64)>,
        source: SampleSource,
        seed: Option<u64>,
    ) -> Result<Self, SamplingError> {
        let mut merged: BTreeMap<Bitstring, u64> = BTreeMap::new();
        for (bits, count) in counts {
            if bits.len() != 2 * n_orbitals {
                return Err(SamplingError::WidthMismatch {
                    found: bits.len() / 2,
                    expected: n_orbitals,
                });
            }
            if count > 0 {
                *merged.entry(bits).or_default() += count;
            }
        }
        let samples: Vec<RawBitstring> = merged
            .into_iter()
            .map(|(bits, count)| RawBitstring { bits, count })
            .collect();
        let total_shots = samples.iter().map(|s| s.count).sum();
        Ok(Self {
            n_orbitals,
            samples,
            total_shots,
            source,
            seed,
        })
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn samples(&self) -> &[RawBitstring] {
        &self.samples
    }

    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    pub fn is_empty(&self) -> bool {
        self.total_shots == 0
    }

    /// One bitstring per shot, in canonical order.
    pub fn expand(&self) -> Vec<Bitstring> {
        self.samples
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.bits, s.count as usize))
            .collect()
    }

    /// Fraction of shots whose bitstring is not valid for `(n_alpha, n_beta)`.
    pub fn violation_fraction(&self, n_alpha: usize, n_beta: usize) -> f64 {
        if self.total_shots == 0 {
            return 0.0;
        }
        let bad: u64 = self
            .samples
            .iter()
            .filter(|s| {
                !crate::determinants::from_raw(&s.bits, self.n_orbitals)
                    .map(|c| c.is_valid_for(n_alpha, n_beta))
                    .unwrap_or(false)
            })
            .map(|s| s.count)
            .sum();
        bad as f64 / self.total_shots as f64
    }
}

/// Parse a counts file with the default alpha-first layout.
pub fn ingest_counts(text: &str, n_orbitals: usize) -> Result<SampleSet, SamplingError> {
    ingest_counts_with(text, n_orbitals, Endianness::AlphaFirst)
}

pub fn ingest_counts_with(
    text: &str,
    n_orbitals: usize,
    endianness: Endianness,
) -> Result<SampleSet, SamplingError> {
    let mut counts = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(SamplingError::MalformedLine {
                line,
                reason: format!("found {} fields", fields.len()),
            });
        }
        let bits: Bitstring = fields[0].parse().map_err(|e: DeterminantError| {
            SamplingError::MalformedLine {
                line,
                reason: e.to_string(),
            }
        })?;
        if bits.len() != 2 * n_orbitals {
            return Err(SamplingError::LengthMismatch {
                line,
                found: bits.len(),
                n_orbitals,
            });
        }
        let count: i128 = fields[1].parse().map_err(|_| SamplingError::MalformedLine {
            line,
            reason: format!("unparseable count {:?}", fields[1]),
        })?;
        if count <= 0 || count > u64::MAX as i128 {
            return Err(SamplingError::NonPositiveCount { line });
        }
        counts.push((endianness.convert(bits), count as u64));
    }
    if counts.is_empty() {
        return Err(SamplingError::EmptyFile);
    }
    SampleSet::from_counts(n_orbitals, counts, SampleSource::File, None)
}

/// Render a sample set as a counts file.
pub fn write_counts(set: &SampleSet, endianness: Endianness) -> String {
    let mut out = String::new();
    writeln!(out, "# shots={}", set.total_shots).unwrap();
    writeln!(out, "# layout={endianness}").unwrap();
    if let Some(seed) = set.seed {
        writeln!(out, "# seed={seed}").unwrap();
    }
    for s in &set.samples {
        writeln!(out, "{} {}", endianness.convert(s.bits), s.count).unwrap();
    }
    out
}

/// Independent per-bit flip channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    flip_probability: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(flip_probability: f64, seed: u64) -> Result<Self, SamplingError> {
        if !(0.0..=1.0).contains(&flip_probability) {
            return Err(SamplingError::InvalidProbability(flip_probability));
        }
        Ok(Self {
            flip_probability,
            seed,
        })
    }

    pub fn noiseless(seed: u64) -> Self {
        Self {
            flip_probability: 0.0,
            seed,
        }
    }

    pub fn flip_probability(&self) -> f64 {
        self.flip_probability
    }
}

/// Draw `shots` bitstrings from the `|c|^2` distribution of `state`, then
/// pass each through the bit-flip channel.
pub fn sample_from_state(
    state: &[(Configuration, f64)],
    n_orbitals: usize,
    shots: u64,
    noise: &NoiseSpec,
) -> Result<SampleSet, SamplingError> {
    if shots == 0 {
        return Err(SamplingError::ZeroShots);
    }
    let mut cumulative = Vec::with_capacity(state.len());
    let mut total = 0.0;
    for (_, c) in state {
        total += c * c;
        cumulative.push(total);
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(SamplingError::ZeroStateVector);
    }
    let encoded: Vec<Bitstring> = state.iter().map(|(c, _)| c.to_bitstring(n_orbitals)).collect();
    let mut stream = rng::stream(noise.seed);
    let mut counts: BTreeMap<Bitstring, u64> = BTreeMap::new();
    let p = noise.flip_probability;
    for _ in 0..shots {
        let u: f64 = stream.random::<f64>() * total;
        let k = cumulative.partition_point(|&c| c <= u).min(state.len() - 1);
        let mut bits = encoded[k];
        if p > 0.0 {
            for pos in 0..bits.len() {
                if stream.random_bool(p) {
                    bits.flip(pos);
                }
            }
        }
        *counts.entry(bits).or_default() += 1;
    }
    SampleSet::from_counts(n_orbitals, counts, SampleSource::Synthetic, Some(noise.seed))
}

/// Shuffle `items` with `seed` and cut into consecutive chunks of
/// `batch_size`; the last chunk may be short.
pub fn partition_shots<T>(mut items: Vec<T>, batch_size: usize, seed: u64) -> Vec<Vec<T>> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    if items.len() <= batch_size {
        return vec![items];
    }
    items.shuffle(&mut rng::stream(seed));
    let mut batches = Vec::with_capacity(items.len().div_ceil(batch_size));
    while !items.is_empty() {
        let rest = items.split_off(batch_size.min(items.len()));
        batches.push(std::mem::replace(&mut items, rest));
    }
    batches
}

/// Shot-level random partition of a sample set.
pub fn split_batches(s: &SampleSet, batch_size: usize, seed: u64) -> Vec<SampleSet> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    if s.total_shots as usize <= batch_size {
        return vec![s.clone()];
    }
    partition_shots(s.expand(), batch_size, seed)
        .into_iter()
        .map(|batch| {
            SampleSet::from_counts(s.n_orbitals, batch.into_iter().map(|b| (b, 1)), s.source, s.seed)
                .expect("widths already consistent")
        })
        .collect()
}
