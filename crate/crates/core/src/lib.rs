//! Classical engine for sample-based selected configuration interaction.
//!
//! Measured bitstrings are decoded into determinants, particle-number
//! violations are repaired by self-consistent configuration recovery, and
//! the Hamiltonian is diagonalised in the sampled subspace. Supermolecular
//! binding energies are assembled from three such runs.

pub mod binding;
pub mod cli;
pub mod determinants;
pub mod driver;
pub mod eigensolver;
pub mod integrals;
pub mod recovery;
pub mod rng;
pub mod sampling;
pub mod slater_condon;

pub use binding::{binding_energy, BindingEnergyReport};
pub use determinants::{Bitstring, Configuration, RawBitstring};
pub use driver::{run_casci, run_qsci, QsciParams, SubspaceResult};
pub use integrals::{parse_fcidump, write_fcidump, IntegralTable};
pub use sampling::SampleSet;
