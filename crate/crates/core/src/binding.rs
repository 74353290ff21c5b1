//! Supermolecular binding energies, `E(complex) - E(A) - E(B)`.

use serde::{Deserialize, Serialize};

use crate::driver::SubspaceResult;

/// CODATA 2018: 1 Hartree in kcal/mol.
pub const HARTREE_TO_KCAL_MOL: f64 = 627.509474;
/// CODATA 2018: 1 Hartree in eV.
pub const HARTREE_TO_EV: f64 = 27.211386;

pub fn hartree_to_kcal_mol(e: f64) -> f64 {
    e * HARTREE_TO_KCAL_MOL
}

pub fn hartree_to_ev(e: f64) -> f64 {
    e * HARTREE_TO_EV
}

pub fn kcal_mol_to_ev(e: f64) -> f64 {
    e / HARTREE_TO_KCAL_MOL * HARTREE_TO_EV
}

/// The parts of a component run that enter a binding report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentEnergy {
    pub energy: f64,
    pub converged: bool,
    pub subspace_dimension: usize,
}

impl From<&SubspaceResult> for ComponentEnergy {
    fn from(r: &SubspaceResult) -> Self {
        Self {
            energy: r.energy,
            converged: r.converged,
            subspace_dimension: r.dimension(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BindingEnergyReport {
    pub method_label: String,
    pub e_complex: f64,
    pub e_fragment_a: f64,
    pub e_fragment_b: f64,
    pub e_binding_hartree: f64,
    pub e_binding_kcal_mol: f64,
    pub e_binding_ev: f64,
    /// Complex, fragment A, fragment B.
    pub convergence_flags: [bool; 3],
    /// Complex, fragment A, fragment B. Sample-based subspaces are not
    /// size-consistent, so the dimensions are reported alongside.
    pub subspace_dimensions: [usize; 3],
}

impl BindingEnergyReport {
    pub fn all_converged(&self) -> bool {
        self.convergence_flags.iter().all(|&f| f)
    }

    pub fn warnings(&self) -> Vec<String> {
        ["complex", "fragment A", "fragment B"]
            .iter()
            .zip(self.convergence_flags)
            .filter(|(_, ok)| !ok)
            .map(|(name, _)| format!("{name} run did not converge"))
            .collect()
    }
}

pub fn binding_energy(
    complex: &SubspaceResult,
    a: &SubspaceResult,
    b: &SubspaceResult,
) -> BindingEnergyReport {
    binding_from_components("QSCI", complex.into(), a.into(), b.into())
}

pub fn binding_from_components(
    method_label: &str,
    complex: ComponentEnergy,
    a: ComponentEnergy,
    b: ComponentEnergy,
) -> BindingEnergyReport {
    let e_binding_hartree = complex.energy - a.energy - b.energy;
    BindingEnergyReport {
        method_label: method_label.to_string(),
        e_complex: complex.energy,
        e_fragment_a: a.energy,
        e_fragment_b: b.energy,
        e_binding_hartree,
        e_binding_kcal_mol: hartree_to_kcal_mol(e_binding_hartree),
        e_binding_ev: hartree_to_ev(e_binding_hartree),
        convergence_flags: [complex.converged, a.converged, b.converged],
        subspace_dimensions: [
            complex.subspace_dimension,
            a.subspace_dimension,
            b.subspace_dimension,
        ],
    }
}
