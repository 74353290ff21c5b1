//! JSON result manifests. The layout is described by
//! `docs/manifest.schema.json`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::binding::BindingEnergyReport;
use crate::driver::{IterationRecord, QsciParams};
use crate::sampling::Endianness;

pub const SCHEMA_VERSION: u32 = 1;
pub const ENGINE_NAME: &str = env!("CARGO_PKG_NAME");
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Run,
    Fci,
    Bind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDigest {
    /// `fcidump`, `counts`, `trial`, or `manifest`, optionally suffixed
    /// with a component role for bind.
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of_bytes(role: &str, path: &Path, bytes: &[u8]) -> Self {
        Self {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        }
    }

    /// Re-hash the file and fail if it no longer matches.
    pub fn verify(&self) -> Result<()> {
        let bytes = std::fs::read(&self.path)
            .with_context(|| format!("cannot read {} input {}", self.role, self.path))?;
        let now = sha256_hex(&bytes);
        if now != self.sha256 {
            bail!(
                "digest mismatch for {} input {}: manifest has {}, file has {}",
                self.role,
                self.path,
                self.sha256,
                now
            );
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Synthetic sampling settings; absent when samples come from a file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticParams {
    pub noise: f64,
    pub shots: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestParams {
    pub qsci: QsciParams,
    pub endianness: Endianness,
    pub allow_large: bool,
    pub synthetic: Option<SyntheticParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySummary {
    pub energy: f64,
    pub converged: bool,
    pub subspace_dimension: usize,
    pub n_orbitals: usize,
    pub n_electrons: usize,
    pub ms2: i64,
    pub core_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentRecord {
    /// `complex`, `fragment-a` or `fragment-b`.
    pub role: String,
    pub command: CommandKind,
    pub result: EnergySummary,
    pub trace: Vec<IterationRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timestamps {
    pub started: String,
    pub finished: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub engine: String,
    pub engine_version: String,
    pub command: CommandKind,
    pub seed: u64,
    /// `shots=.. batch=.. tol=..`, as echoed in the text summary.
    pub parameter_echo: String,
    pub inputs: Vec<InputDigest>,
    pub params: ManifestParams,
    pub trace: Vec<IterationRecord>,
    pub result: Option<EnergySummary>,
    pub components: Vec<ComponentRecord>,
    pub binding: Option<BindingEnergyReport>,
    pub timestamps: Timestamps,
}

impl RunManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text).context("not a valid run manifest")?;
        if m.schema_version != SCHEMA_VERSION {
            bail!(
                "manifest schema version {} is not supported (expected {SCHEMA_VERSION})",
                m.schema_version
            );
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in manifest {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        s
    }

    /// Check every recorded input against the file on disk.
    pub fn verify_inputs(&self) -> Result<()> {
        self.inputs.iter().try_for_each(InputDigest::verify)
    }
}

pub fn parameter_echo(p: &QsciParams) -> String {
    format!("shots={} batch={} tol={:e}", p.shots, p.batch_size, p.energy_tolerance)
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
