//! The sample-based diagonalisation loop.
//!
//! Each recovery iteration repairs the whole shot pool against the current
//! occupation profile, partitions the repaired shots into batches, and
//! diagonalises the Hamiltonian over each batch's subspace: by default
//! every pairing of the alpha and beta strings seen in the batch. The
//! lowest batch supplies the profile for the next iteration. The loop
//! stops once the best-so-far energy changes by less than the tolerance.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::determinants::{
    enumerate_full_space_capped, Configuration, DeterminantError, DEFAULT_SPACE_CAP,
};
use crate::eigensolver::{ground_state_with, EigenError, GroundState, SolverOptions};
use crate::integrals::{IntegralError, IntegralTable};
use crate::recovery::{occupation_profile, repair_sample_set, OccupationProfile, RecoveryError};
use crate::rng::derive_seed;
use crate::sampling::{partition_shots, SampleSet};
use crate::slater_condon::{build_subspace_hamiltonian, SlaterCondonError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("sample set is empty")]
    EmptySampleSet,
    #[error("no sample is valid for ({n_alpha}, {n_beta}) electrons and recovery is disabled")]
    NoValidConfigurations { n_alpha: usize, n_beta: usize },
    #[error("samples cover {samples} orbitals but the integrals have {integrals}")]
    WidthMismatch { samples: usize, integrals: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Integrals(#[from] IntegralError),
    #[error(transparent)]
    Determinants(#[from] DeterminantError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Hamiltonian(#[from] SlaterCondonError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// How batch subspaces are combined within one recovery iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Diagonalise each batch separately and keep the lowest.
    #[default]
    LowestBatch,
    /// Diagonalise all distinct recovered configurations together.
    Union,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QsciParams {
    pub shots: u64,
    pub batch_size: usize,
    pub energy_tolerance: f64,
    pub max_recovery_iterations: usize,
    pub subspace_cap: Option<usize>,
    pub seed: u64,
    pub aggregation: Aggregation,
    pub subspace: SubspaceConstruction,
    pub recovery: bool,
    pub solver_tolerance: f64,
    pub solver_max_iterations: usize,
}

impl Default for QsciParams {
    fn default() -> Self {
        let solver = SolverOptions::default();
        Self {
            shots: 5000,
            batch_size: 500,
            energy_tolerance: 1e-6,
            max_recovery_iterations: 10,
            subspace_cap: None,
            seed: 0,
            aggregation: Aggregation::LowestBatch,
            subspace: SubspaceConstruction::SpinProduct,
            recovery: true,
            solver_tolerance: solver.tol,
            solver_max_iterations: solver.max_iter,
        }
    }
}

impl QsciParams {
    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: &str| Err(DriverError::InvalidParams(m.into()));
        if !(self.energy_tolerance > 0.0) {
            return bad("energy tolerance must be positive");
        }
        if !(self.solver_tolerance > 0.0) {
            return bad("solver tolerance must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.shots == 0 {
            return bad("shots must be at least 1");
        }
        if self.batch_size as u64 > self.shots {
            return bad("batch size exceeds the shot count");
        }
        if self.max_recovery_iterations == 0 {
            return bad("at least one recovery iteration is required");
        }
        if self.subspace_cap == Some(0) {
            return bad("subspace cap must be positive");
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver_tolerance,
            max_iter: self.solver_max_iterations,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Dimension of the subspace selected in this iteration.
    pub subspace_dimension: usize,
    /// Best energy observed up to and including this iteration.
    pub energy: f64,
    /// Lowest batch energy of this iteration alone.
    pub iteration_energy: f64,
    pub violation_fraction: f64,
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceResult {
    pub energy: f64,
    pub basis: Vec<Configuration>,
    pub coefficients: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub converged: bool,
}

impl SubspaceResult {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }
}

/// How a batch of recovered shots becomes a determinant basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubspaceConstruction {
    /// Every pairing of a sampled alpha string with a sampled beta string.
    #[default]
    SpinProduct,
    /// Only the distinct sampled configurations.
    Distinct,
}

/// Basis for a shot list, optionally truncated to the `cap` most frequently
/// sampled configurations (unsampled product members count zero; ties are
/// broken in canonical order). Returned sorted.
pub fn select_subspace(
    shots: &[Configuration],
    construction: SubspaceConstruction,
    cap: Option<usize>,
) -> Vec<Configuration> {
    let mut counts: BTreeMap<Configuration, u64> = BTreeMap::new();
    for c in shots {
        *counts.entry(*c).or_default() += 1;
    }
    if construction == SubspaceConstruction::SpinProduct {
        let alphas: BTreeSet<u64> = shots.iter().map(|c| c.alpha).collect();
        let betas: BTreeSet<u64> = shots.iter().map(|c| c.beta).collect();
        for &a in &alphas {
            for &b in &betas {
                counts.entry(Configuration::new(a, b)).or_insert(0);
            }
        }
    }
    match cap {
        Some(cap) if counts.len() > cap => {
            let mut ranked: Vec<(Configuration, u64)> = counts.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut kept: Vec<Configuration> = ranked.into_iter().take(cap).map(|(c, _)| c).collect();
            kept.sort();
            kept
        }
        _ => counts.into_keys().collect(),
    }
}

fn diagonalise(
    basis: &[Configuration],
    t: &IntegralTable,
    solver: &SolverOptions,
) -> Result<GroundState, DriverError> {
    let h = build_subspace_hamiltonian(basis, t)?;
    Ok(ground_state_with(&h, solver)?)
}

/// Run sample-based diagonalisation with configuration recovery.
pub fn run_qsci(
    t: &IntegralTable,
    samples: &SampleSet,
    p: &QsciParams,
) -> Result<SubspaceResult, DriverError> {
    p.validate()?;
    let (n_alpha, n_beta) = t.electron_split()?;
    let n = t.n_orbitals();
    if samples.n_orbitals() != n {
        return Err(DriverError::WidthMismatch {
            samples: samples.n_orbitals(),
            integrals: n,
        });
    }
    if samples.is_empty() {
        return Err(DriverError::EmptySampleSet);
    }
    let violation_fraction = samples.violation_fraction(n_alpha, n_beta);
    let solver = p.solver();

    let mut profile = OccupationProfile::uniform(n, n_alpha, n_beta);
    let mut best: Option<(f64, Vec<Configuration>, Vec<f64>)> = None;
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut converged = false;

    for iteration in 0..p.max_recovery_iterations {
        let iteration_seed = derive_seed(p.seed, iteration as u64);
        let shots: Vec<Configuration> = if p.recovery {
            repair_sample_set(samples, &profile, n_alpha, n_beta, derive_seed(iteration_seed, 0))?
        } else {
            samples
                .expand()
                .iter()
                .filter_map(|b| crate::determinants::from_raw(b, n).ok())
                .filter(|c| c.is_valid_for(n_alpha, n_beta))
                .collect()
        };
        if shots.is_empty() {
            return Err(DriverError::NoValidConfigurations { n_alpha, n_beta });
        }

        let batches: Vec<Vec<Configuration>> = match p.aggregation {
            Aggregation::Union => vec![shots],
            Aggregation::LowestBatch => {
                partition_shots(shots, p.batch_size, derive_seed(iteration_seed, 1))
            }
        };
        let n_batches = batches.len();
        let solved: Vec<(Vec<Configuration>, GroundState)> = batches
            .par_iter()
            .map(|batch| {
                let basis = select_subspace(batch, p.subspace, p.subspace_cap);
                diagonalise(&basis, t, &solver).map(|gs| (basis, gs))
            })
            .collect::<Result<_, _>>()?;
        let (basis, gs) = solved
            .into_iter()
            .reduce(|a, b| if b.1.energy < a.1.energy { b } else { a })
            .expect("at least one batch");

        profile = occupation_profile(&basis, &gs.coefficients, n)?;
        let previous_best = best.as_ref().map(|b| b.0);
        if previous_best.is_none_or(|e| gs.energy < e) {
            best = Some((gs.energy, basis.clone(), gs.coefficients.clone()));
        }
        let best_energy = best.as_ref().expect("set above").0;
        trace.push(IterationRecord {
            iteration: iteration + 1,
            subspace_dimension: basis.len(),
            energy: best_energy,
            iteration_energy: gs.energy,
            violation_fraction,
            batches: n_batches,
        });
        if let Some(prev) = previous_best {
            if (best_energy - prev).abs() < p.energy_tolerance {
                converged = true;
                break;
            }
        }
    }

    let (energy, basis, coefficients) = best.expect("at least one iteration");
    Ok(SubspaceResult {
        energy,
        basis,
        coefficients,
        iterations: trace,
        converged,
    })
}

/// Exact diagonalisation over the full configuration space.
pub fn run_casci(t: &IntegralTable) -> Result<SubspaceResult, DriverError> {
    run_casci_with(t, DEFAULT_SPACE_CAP, &SolverOptions::default())
}

pub fn run_casci_with(
    t: &IntegralTable,
    cap: u128,
    solver: &SolverOptions,
) -> Result<SubspaceResult, DriverError> {
    let (n_alpha, n_beta) = t.electron_split()?;
    let basis = enumerate_full_space_capped(t.n_orbitals(), n_alpha, n_beta, cap)?;
    let gs = diagonalise(&basis, t, solver)?;
    Ok(SubspaceResult {
        energy: gs.energy,
        iterations: vec![IterationRecord {
            iteration: 1,
            subspace_dimension: basis.len(),
            energy: gs.energy,
            iteration_energy: gs.energy,
            violation_fraction: 0.0,
            batches: 1,
        }],
        basis,
        coefficients: gs.coefficients,
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::determinants::enumerate_full_space;
    use crate::sampling::SampleSource;
    use crate::slater_condon::diagonal_element;

    fn toy_table() -> IntegralTable {
        let mut t = IntegralTable::new(2, 2, 0).unwrap();
        t.set_core_energy(0.3);
        t.set_one_body(0, 0, -1.0).unwrap();
        t.set_one_body(1, 1, -0.2).unwrap();
        t.set_one_body(0, 1, 0.1).unwrap();
        t.set_two_body(0, 0, 0, 0, 0.7).unwrap();
        t.set_two_body(1, 1, 1, 1, 0.5).unwrap();
        t.set_two_body(0, 0, 1, 1, 0.4).unwrap();
        t.set_two_body(0, 1, 0, 1, 0.15).unwrap();
        t
    }

    fn samples_of(configs: &[Configuration], n: usize) -> SampleSet {
        SampleSet::from_counts(n, configs.iter().map(|c| (c.to_bitstring(n), 1)), SampleSource::File, None)
            .unwrap()
    }

    #[test]
    fn defaults_match_published_parameters() {
        let p = QsciParams::default();
        assert_eq!(p.shots, 5000);
        assert_eq!(p.batch_size, 500);
        assert_eq!(p.energy_tolerance, 1e-6);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn invalid_params() {
        let mut p = QsciParams::default();
        p.batch_size = 6000;
        assert!(p.validate().is_err());
        let mut p = QsciParams::default();
        p.energy_tolerance = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn casci_toy_matches_closed_form() {
        let t = toy_table();
        let r = run_casci(&t).unwrap();
        assert_eq!(r.dimension(), 4);
        let basis = enumerate_full_space(2, 1, 1).unwrap();
        let h = build_subspace_hamiltonian(&basis, &t).unwrap();
        let exact = crate::eigensolver::dense_spectrum(&h).unwrap()[0];
        assert!((r.energy - exact).abs() < 1e-12);
    }

    #[test]
    fn single_configuration_sample() {
        let t = toy_table();
        let c = Configuration::from_occupations(&[1], &[0]);
        let s = samples_of(&[c], 2);
        let r = run_qsci(&t, &s, &QsciParams::default()).unwrap();
        assert_eq!(r.basis, vec![c]);
        assert!((r.energy - diagonal_element(&c, &t)).abs() < 1e-14);
    }

    #[test]
    fn full_space_samples_reproduce_casci() {
        let t = toy_table();
        let s = samples_of(&enumerate_full_space(2, 1, 1).unwrap(), 2);
        let r = run_qsci(&t, &s, &QsciParams::default()).unwrap();
        let exact = run_casci(&t).unwrap();
        assert!((r.iterations[0].energy - exact.energy).abs() < 1e-10);
        assert!(r.converged);
    }

    #[test]
    fn empty_and_mismatched_samples() {
        let t = toy_table();
        let s = SampleSet::from_counts(2, [], SampleSource::File, None).unwrap();
        assert_eq!(run_qsci(&t, &s, &QsciParams::default()), Err(DriverError::EmptySampleSet));
        let s = samples_of(&[Configuration::from_occupations(&[0], &[0])], 3);
        assert!(matches!(
            run_qsci(&t, &s, &QsciParams::default()),
            Err(DriverError::WidthMismatch { .. })
        ));
    }

    #[test]
    fn recovery_disabled_needs_valid_samples() {
        let t = toy_table();
        let bad = Configuration::from_occupations(&[0, 1], &[0]);
        let s = samples_of(&[bad], 2);
        let p = QsciParams {
            recovery: false,
            ..QsciParams::default()
        };
        assert_eq!(
            run_qsci(&t, &s, &p),
            Err(DriverError::NoValidConfigurations { n_alpha: 1, n_beta: 1 })
        );
        let r = run_qsci(&t, &s, &QsciParams::default()).unwrap();
        assert!(r.basis.iter().all(|c| c.is_valid_for(1, 1)));
    }

    #[test]
    fn subspace_cap_keeps_most_frequent() {
        let a = Configuration::from_occupations(&[0], &[0]);
        let b = Configuration::from_occupations(&[0], &[1]);
        let c = Configuration::from_occupations(&[1], &[0]);
        let shots = [c, c, c, b, a, a];
        let distinct = SubspaceConstruction::Distinct;
        assert_eq!(select_subspace(&shots, distinct, Some(2)), vec![a, c]);
        // tie between a and b at one count each: canonical order keeps a
        assert_eq!(select_subspace(&[c, c, b, a], distinct, Some(2)), vec![a, c]);
        assert_eq!(select_subspace(&shots, distinct, None), vec![a, b, c]);
    }

    #[test]
    fn spin_product_pairs_all_strings() {
        let a = Configuration::from_occupations(&[0], &[0]);
        let d = Configuration::from_occupations(&[1], &[1]);
        let product = select_subspace(&[a, d, d], SubspaceConstruction::SpinProduct, None);
        assert_eq!(
            product,
            vec![
                a,
                Configuration::from_occupations(&[0], &[1]),
                Configuration::from_occupations(&[1], &[0]),
                d
            ]
        );
        // sampled configurations outrank unsampled product members
        let capped = select_subspace(&[a, d, d], SubspaceConstruction::SpinProduct, Some(2));
        assert_eq!(capped, vec![a, d]);
    }
}
