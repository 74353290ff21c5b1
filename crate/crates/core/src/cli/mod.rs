//! Command-line front end: `run`, `fci`, `bind` and `sample`.
//!
//! Every subcommand accepts the same flag set so that one `--config` file
//! can drive a whole campaign; flags that do not apply are ignored.
//! Exit codes: 0 converged, 2 finished without convergence, 1 error.

mod config;
pub mod manifest;
mod summary;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::binding::{binding_from_components, ComponentEnergy};
use crate::determinants::{
    from_raw, full_space_size, Bitstring, Configuration, DEFAULT_SPACE_CAP,
};
use crate::driver::{
    run_casci_with, run_qsci, Aggregation, DriverError, IterationRecord, QsciParams,
    SubspaceConstruction, SubspaceResult,
};
use crate::eigensolver::{EigenError, SolverOptions, DEFAULT_DENSE_CAP};
use crate::integrals::{parse_fcidump, IntegralTable};
use crate::sampling::{
    ingest_counts_with, sample_from_state, write_counts, Endianness, NoiseSpec, SampleSet,
};

pub use manifest::{
    CommandKind, ComponentRecord, EnergySummary, InputDigest, ManifestParams, RunManifest,
    SyntheticParams,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const COUNTS_FILE: &str = "counts.txt";

#[derive(Debug, Parser)]
#[command(name = "qsci", version, about = "Sample-based selected CI with configuration recovery")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample-based diagonalisation of one system.
    #[command(args_override_self = true)]
    Run {
        #[arg(required_unless_present = "reproduce")]
        fcidump: Option<PathBuf>,
        /// Measured counts file; omit with --synthetic.
        counts: Option<PathBuf>,
        /// Re-run a previous manifest after checking its input digests.
        #[arg(long, conflicts_with_all = ["fcidump", "counts"])]
        reproduce: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Exact diagonalisation over the full active space.
    #[command(args_override_self = true)]
    Fci {
        #[arg(required_unless_present = "reproduce")]
        fcidump: Option<PathBuf>,
        #[arg(long, conflicts_with = "fcidump")]
        reproduce: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Binding energy from a complex and two fragments: three manifests,
    /// or three FCIDUMPs computed with shared parameters.
    #[command(args_override_self = true)]
    Bind {
        #[arg(num_args = 3, required = true, value_names = ["COMPLEX", "FRAGMENT_A", "FRAGMENT_B"])]
        inputs: Vec<PathBuf>,
        /// Method for FCIDUMP inputs.
        #[arg(long, value_enum, default_value_t = Method::Qsci)]
        method: Method,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Write a synthetic counts file drawn from the ground state or a trial state.
    #[command(args_override_self = true)]
    Sample {
        fcidump: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Qsci,
    Casci,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Base seed for every random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Recovery convergence threshold on the energy (Hartree).
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub shots: u64,
    #[arg(long, default_value_t = 500)]
    pub batch_size: usize,
    /// Maximum recovery iterations.
    #[arg(long, default_value_t = 10)]
    pub max_iter: usize,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Spin-block order of bitstrings in counts and trial files.
    #[arg(long, default_value_t = Endianness::AlphaFirst)]
    pub endianness: Endianness,
    /// TOML file of `flag-name = value` pairs; command-line flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sample from the ground state (or --trial) instead of a counts file.
    #[arg(long)]
    pub synthetic: bool,
    /// Independent bit-flip probability for synthetic sampling.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Trial state for synthetic sampling: lines of `bitstring coefficient`.
    #[arg(long)]
    pub trial: Option<PathBuf>,
    /// Diagonalise all recovered shots together instead of per batch.
    #[arg(long)]
    pub union: bool,
    /// Batch subspace: `spin-product` or `distinct`.
    #[arg(long, default_value = "spin-product", value_parser = parse_subspace)]
    pub subspace: SubspaceConstruction,
    /// Keep only this many of the most frequently sampled configurations.
    #[arg(long)]
    pub subspace_cap: Option<usize>,
    /// Discard invalid shots instead of recovering them.
    #[arg(long)]
    pub no_recovery: bool,
    /// Lift the full-space dimension cap for exact diagonalisation.
    #[arg(long)]
    pub allow_large: bool,
}

fn parse_subspace(s: &str) -> Result<SubspaceConstruction, String> {
    match s {
        "spin-product" => Ok(SubspaceConstruction::SpinProduct),
        "distinct" => Ok(SubspaceConstruction::Distinct),
        other => Err(format!("unknown subspace {other:?} (expected spin-product or distinct)")),
    }
}

impl CommonArgs {
    fn qsci_params(&self) -> QsciParams {
        QsciParams {
            shots: self.shots,
            batch_size: self.batch_size,
            energy_tolerance: self.tol,
            max_recovery_iterations: self.max_iter,
            subspace_cap: self.subspace_cap,
            seed: self.seed,
            aggregation: if self.union { Aggregation::Union } else { Aggregation::LowestBatch },
            subspace: self.subspace,
            recovery: !self.no_recovery,
            ..QsciParams::default()
        }
    }

    fn manifest_params(&self, synthetic: bool) -> ManifestParams {
        ManifestParams {
            qsci: self.qsci_params(),
            endianness: self.endianness,
            allow_large: self.allow_large,
            synthetic: synthetic.then_some(SyntheticParams {
                noise: self.noise,
                shots: self.shots,
                seed: self.seed,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    NotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Converged => 0,
            Self::NotConverged => 2,
        }
    }

    fn from_flag(converged: bool) -> Self {
        if converged {
            Self::Converged
        } else {
            Self::NotConverged
        }
    }
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn main_with_args(args: Vec<OsString>) -> i32 {
    let args = match config::expand_args(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 1;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(cli.command) {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn execute(command: Command) -> Result<Outcome> {
    match command {
        Command::Run { fcidump, counts, reproduce, common } => {
            let spec = match reproduce {
                Some(path) => RunSpec::from_manifest(&RunManifest::load(&path)?, CommandKind::Run)?,
                None => RunSpec::from_args(fcidump.expect("required by clap"), counts, &common)?,
            };
            finish(&common.out, execute_run(&spec)?, spec.expected)
        }
        Command::Fci { fcidump, reproduce, common } => {
            let spec = match reproduce {
                Some(path) => RunSpec::from_manifest(&RunManifest::load(&path)?, CommandKind::Fci)?,
                None => RunSpec {
                    fcidump: fcidump.expect("required by clap"),
                    counts: None,
                    trial: None,
                    params: common.manifest_params(false),
                    expected: None,
                },
            };
            finish(&common.out, execute_fci(&spec)?, spec.expected)
        }
        Command::Bind { inputs, method, common } => finish(&common.out, execute_bind(&inputs, method, &common)?, None),
        Command::Sample { fcidump, common } => execute_sample(&fcidump, &common),
    }
}

/// Everything needed to (re)compute one run.
#[derive(Debug, Clone)]
struct RunSpec {
    fcidump: PathBuf,
    counts: Option<PathBuf>,
    trial: Option<PathBuf>,
    params: ManifestParams,
    /// Energy a reproduced run must match.
    expected: Option<f64>,
}

impl RunSpec {
    fn from_args(fcidump: PathBuf, counts: Option<PathBuf>, common: &CommonArgs) -> Result<Self> {
        match (&counts, common.synthetic) {
            (None, false) => bail!("supply a counts file or --synthetic"),
            (Some(_), true) => bail!("a counts file and --synthetic are mutually exclusive"),
            _ => {}
        }
        Ok(Self {
            fcidump,
            counts,
            trial: common.trial.clone(),
            params: common.manifest_params(common.synthetic),
            expected: None,
        })
    }

    fn from_manifest(m: &RunManifest, kind: CommandKind) -> Result<Self> {
        if m.command != kind {
            bail!("manifest records a {:?} command, not {:?}", m.command, kind);
        }
        m.verify_inputs()?;
        let find = |role: &str| m.inputs.iter().find(|i| i.role == role).map(|i| PathBuf::from(&i.path));
        Ok(Self {
            fcidump: find("fcidump").ok_or_else(|| anyhow!("manifest has no fcidump input"))?,
            counts: find("counts"),
            trial: find("trial"),
            params: m.params.clone(),
            expected: m.result.as_ref().map(|r| r.energy),
        })
    }
}

fn read_input(role: &str, path: &Path) -> Result<(String, InputDigest)> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {role} {}", path.display()))?;
    let digest = InputDigest::of_bytes(role, path, &bytes);
    let text = String::from_utf8(bytes).with_context(|| format!("{role} {} is not UTF-8 text", path.display()))?;
    Ok((text, digest))
}

fn load_fcidump(path: &Path) -> Result<(IntegralTable, InputDigest)> {
    let (text, digest) = read_input("fcidump", path)?;
    let t = parse_fcidump(&text).with_context(|| format!("in FCIDUMP {}", path.display()))?;
    Ok((t, digest))
}

fn space_cap(allow_large: bool) -> u128 {
    if allow_large {
        DEFAULT_SPACE_CAP
    } else {
        DEFAULT_DENSE_CAP as u128
    }
}

fn casci(t: &IntegralTable, allow_large: bool, solver: &SolverOptions) -> Result<SubspaceResult> {
    let cap = space_cap(allow_large);
    match run_casci_with(t, cap, solver) {
        Ok(r) => Ok(r),
        Err(DriverError::Determinants(e @ crate::determinants::DeterminantError::SpaceTooLarge { .. })) => {
            Err(anyhow!(e)).context(if allow_large {
                "the active space is beyond the hard limit"
            } else {
                "the active space is above the default cap; pass --allow-large to proceed"
            })
        }
        Err(DriverError::Eigen(EigenError::NotConverged { best })) => {
            log::warn!("eigensolver stopped at residual {:e}", best.residual_norm);
            let (na, nb) = t.electron_split()?;
            let dim = full_space_size(t.n_orbitals(), na, nb) as usize;
            Ok(SubspaceResult {
                energy: best.energy,
                basis: crate::determinants::enumerate_full_space(t.n_orbitals(), na, nb)?,
                coefficients: best.coefficients,
                iterations: vec![IterationRecord {
                    iteration: 1,
                    subspace_dimension: dim,
                    energy: best.energy,
                    iteration_energy: best.energy,
                    violation_fraction: 0.0,
                    batches: 1,
                }],
                converged: false,
            })
        }
        Err(e) => Err(e.into()),
    }
}

/// Parse a trial state file of `bitstring coefficient` lines.
fn parse_trial(text: &str, t: &IntegralTable, endianness: Endianness) -> Result<Vec<(Configuration, f64)>> {
    let n = t.n_orbitals();
    let (na, nb) = t.electron_split()?;
    let mut state = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let content = line.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let ctx = || format!("line {}", idx + 1);
        let mut fields = content.split_whitespace();
        let (Some(b), Some(c), None) = (fields.next(), fields.next(), fields.next()) else {
            bail!("{}: expected `bitstring coefficient`", ctx());
        };
        let mut bits: Bitstring = b.parse().map_err(|e| anyhow!("{e}")).with_context(ctx)?;
        if endianness == Endianness::BetaFirst {
            bits = bits.swap_blocks();
        }
        let config = from_raw(&bits, n).with_context(ctx)?;
        if !config.is_valid_for(na, nb) {
            bail!("{}: configuration does not hold ({na}, {nb}) electrons", ctx());
        }
        let coefficient: f64 = c.parse().with_context(ctx)?;
        state.push((config, coefficient));
    }
    if state.is_empty() {
        bail!("trial state is empty");
    }
    Ok(state)
}

/// State to sample from: the trial file if given, else the exact ground state.
fn sampling_state(
    t: &IntegralTable,
    trial: Option<&Path>,
    params: &ManifestParams,
    inputs: &mut Vec<InputDigest>,
) -> Result<Vec<(Configuration, f64)>> {
    match trial {
        Some(path) => {
            let (text, digest) = read_input("trial", path)?;
            inputs.push(digest);
            parse_trial(&text, t, params.endianness).with_context(|| format!("in trial state {}", path.display()))
        }
        None => {
            let gs = casci(t, params.allow_large, &params.qsci.solver())?;
            Ok(gs.basis.into_iter().zip(gs.coefficients).collect())
        }
    }
}

fn synthetic_samples(
    t: &IntegralTable,
    trial: Option<&Path>,
    params: &ManifestParams,
    s: &SyntheticParams,
    inputs: &mut Vec<InputDigest>,
) -> Result<SampleSet> {
    let state = sampling_state(t, trial, params, inputs)?;
    let noise = NoiseSpec::new(s.noise, s.seed)?;
    Ok(sample_from_state(&state, t.n_orbitals(), s.shots, &noise)?)
}

fn energy_summary(t: &IntegralTable, r: &SubspaceResult) -> EnergySummary {
    EnergySummary {
        energy: r.energy,
        converged: r.converged,
        subspace_dimension: r.dimension(),
        n_orbitals: t.n_orbitals(),
        n_electrons: t.n_electrons(),
        ms2: t.ms2(),
        core_energy: t.core_energy(),
    }
}

fn new_manifest(command: CommandKind, params: ManifestParams, inputs: Vec<InputDigest>, started: String) -> RunManifest {
    RunManifest {
        schema_version: manifest::SCHEMA_VERSION,
        engine: manifest::ENGINE_NAME.to_string(),
        engine_version: manifest::ENGINE_VERSION.to_string(),
        command,
        seed: params.qsci.seed,
        parameter_echo: manifest::parameter_echo(&params.qsci),
        inputs,
        params,
        trace: Vec::new(),
        result: None,
        components: Vec::new(),
        binding: None,
        timestamps: manifest::Timestamps {
            started,
            finished: String::new(),
        },
    }
}

/// QSCI on one system; shared by `run` and FCIDUMP-driven `bind`.
fn qsci_component(spec: &RunSpec) -> Result<(IntegralTable, SubspaceResult, Vec<InputDigest>)> {
    let (t, digest) = load_fcidump(&spec.fcidump)?;
    let mut inputs = vec![digest];
    let samples = match (&spec.counts, &spec.params.synthetic) {
        (Some(path), _) => {
            let (text, digest) = read_input("counts", path)?;
            inputs.push(digest);
            ingest_counts_with(&text, t.n_orbitals(), spec.params.endianness)
                .with_context(|| format!("in counts file {}", path.display()))?
        }
        (None, Some(s)) => synthetic_samples(&t, spec.trial.as_deref(), &spec.params, s, &mut inputs)?,
        (None, None) => bail!("no samples: supply a counts file or --synthetic"),
    };
    let r = run_qsci(&t, &samples, &spec.params.qsci)?;
    Ok((t, r, inputs))
}

fn execute_run(spec: &RunSpec) -> Result<RunManifest> {
    let started = manifest::now();
    let (t, r, inputs) = qsci_component(spec)?;
    let mut m = new_manifest(CommandKind::Run, spec.params.clone(), inputs, started);
    m.result = Some(energy_summary(&t, &r));
    m.trace = r.iterations;
    Ok(m)
}

fn fci_component(spec: &RunSpec) -> Result<(IntegralTable, SubspaceResult, Vec<InputDigest>)> {
    let (t, digest) = load_fcidump(&spec.fcidump)?;
    let r = casci(&t, spec.params.allow_large, &spec.params.qsci.solver())?;
    Ok((t, r, vec![digest]))
}

fn execute_fci(spec: &RunSpec) -> Result<RunManifest> {
    let started = manifest::now();
    let (t, r, inputs) = fci_component(spec)?;
    let mut m = new_manifest(CommandKind::Fci, spec.params.clone(), inputs, started);
    m.result = Some(energy_summary(&t, &r));
    m.trace = r.iterations;
    Ok(m)
}

const ROLES: [&str; 3] = ["complex", "fragment-a", "fragment-b"];

fn is_manifest(path: &Path) -> Result<bool> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{'))
}

fn execute_bind(paths: &[PathBuf], method: Method, common: &CommonArgs) -> Result<RunManifest> {
    let started = manifest::now();
    let kinds = paths.iter().map(|p| is_manifest(p)).collect::<Result<Vec<_>>>()?;
    let (components, inputs, params) = if kinds.iter().all(|&k| k) {
        bind_from_manifests(paths)?
    } else if kinds.iter().all(|&k| !k) {
        bind_from_fcidumps(paths, method, common)?
    } else {
        bail!("bind inputs must be three manifests or three FCIDUMPs, not a mix");
    };
    let label = match (components.iter().all(|c| c.command == CommandKind::Fci), components.iter().all(|c| c.command == CommandKind::Run)) {
        (true, _) => "CASCI",
        (_, true) => "QSCI",
        _ => "mixed",
    };
    let energy = |c: &ComponentRecord| ComponentEnergy {
        energy: c.result.energy,
        converged: c.result.converged,
        subspace_dimension: c.result.subspace_dimension,
    };
    let report = binding_from_components(label, energy(&components[0]), energy(&components[1]), energy(&components[2]));
    for w in report.warnings() {
        log::warn!("{w}");
    }
    let mut m = new_manifest(CommandKind::Bind, params, inputs, started);
    m.components = components;
    m.binding = Some(report);
    Ok(m)
}

type BindParts = (Vec<ComponentRecord>, Vec<InputDigest>, ManifestParams);

fn bind_from_manifests(paths: &[PathBuf]) -> Result<BindParts> {
    let mut components = Vec::new();
    let mut inputs = Vec::new();
    let mut params = None;
    for (role, path) in ROLES.iter().zip(paths) {
        let (text, digest) = read_input(&format!("manifest:{role}"), path)?;
        let m = RunManifest::from_json(&text).with_context(|| format!("in manifest {}", path.display()))?;
        let result = m
            .result
            .clone()
            .ok_or_else(|| anyhow!("manifest {} holds no energy result", path.display()))?;
        if m.command == CommandKind::Bind {
            bail!("manifest {} is itself a binding report", path.display());
        }
        inputs.push(digest);
        params.get_or_insert(m.params.clone());
        components.push(ComponentRecord {
            role: role.to_string(),
            command: m.command,
            result,
            trace: m.trace,
        });
    }
    Ok((components, inputs, params.expect("three manifests")))
}

fn bind_from_fcidumps(paths: &[PathBuf], method: Method, common: &CommonArgs) -> Result<BindParts> {
    let params = common.manifest_params(method == Method::Qsci);
    let command = match method {
        Method::Qsci => CommandKind::Run,
        Method::Casci => CommandKind::Fci,
    };
    let specs: Vec<RunSpec> = paths
        .iter()
        .map(|p| RunSpec {
            fcidump: p.clone(),
            counts: None,
            trial: None,
            params: params.clone(),
            expected: None,
        })
        .collect();
    let results: Vec<Result<(IntegralTable, SubspaceResult, Vec<InputDigest>)>> = std::thread::scope(|s| {
        let handles: Vec<_> = specs
            .iter()
            .map(|spec| {
                s.spawn(move || match method {
                    Method::Qsci => qsci_component(spec),
                    Method::Casci => fci_component(spec),
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("component thread panicked")).collect()
    });
    let mut components = Vec::new();
    let mut inputs = Vec::new();
    for (role, res) in ROLES.iter().zip(results) {
        let (t, r, digests) = res.with_context(|| format!("{role} calculation failed"))?;
        inputs.extend(digests.into_iter().map(|mut d| {
            d.role = format!("{}:{role}", d.role);
            d
        }));
        components.push(ComponentRecord {
            role: role.to_string(),
            command,
            result: energy_summary(&t, &r),
            trace: r.iterations,
        });
    }
    Ok((components, inputs, params))
}

fn execute_sample(fcidump: &Path, common: &CommonArgs) -> Result<Outcome> {
    let (t, _) = load_fcidump(fcidump)?;
    let params = common.manifest_params(true);
    let s = params.synthetic.expect("synthetic parameters");
    let set = synthetic_samples(&t, common.trial.as_deref(), &params, &s, &mut Vec::new())?;
    std::fs::create_dir_all(&common.out)
        .with_context(|| format!("cannot create output directory {}", common.out.display()))?;
    let path = common.out.join(COUNTS_FILE);
    std::fs::write(&path, write_counts(&set, common.endianness))
        .with_context(|| format!("cannot write {}", path.display()))?;
    println!("wrote {} shots in {} distinct bitstrings to {}", set.total_shots(), set.samples().len(), path.display());
    Ok(Outcome::Converged)
}

/// Write manifest and summary, print the summary, and map to an outcome.
fn finish(out: &Path, mut m: RunManifest, expected: Option<f64>) -> Result<Outcome> {
    m.timestamps.finished = manifest::now();
    std::fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let text = summary::render(&m);
    for (name, content) in [(MANIFEST_FILE, m.to_json()), (SUMMARY_FILE, text.clone())] {
        let path = out.join(name);
        std::fs::write(&path, content).with_context(|| format!("cannot write {}", path.display()))?;
    }
    print!("{text}");
    if let (Some(want), Some(got)) = (expected, m.result.as_ref().map(|r| r.energy)) {
        if want.to_bits() != got.to_bits() {
            bail!("reproduced energy {got:?} differs from the manifest's {want:?}");
        }
        println!("reproduced the recorded energy exactly");
    }
    let converged = match &m.binding {
        Some(b) => b.all_converged(),
        None => m.result.as_ref().is_some_and(|r| r.converged),
    };
    Ok(Outcome::from_flag(converged))
}
