//! Aligned plain-text summaries.

use std::fmt::Write;

use super::manifest::{CommandKind, RunManifest};

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn render(m: &RunManifest) -> String {
    let mut s = String::new();
    let name = match m.command {
        CommandKind::Run => "run",
        CommandKind::Fci => "fci",
        CommandKind::Bind => "bind",
    };
    writeln!(s, "qsci {name} ({} {})", m.engine, m.engine_version).unwrap();
    for i in &m.inputs {
        writeln!(s, "{:<22} {}  sha256 {}", i.role, i.path, &i.sha256[..16]).unwrap();
    }
    if m.command != CommandKind::Fci {
        writeln!(s, "{:<22} {}", "parameters", m.parameter_echo).unwrap();
        if let Some(syn) = &m.params.synthetic {
            writeln!(s, "{:<22} synthetic noise={} seed={}", "samples", syn.noise, syn.seed).unwrap();
        }
    }
    if let Some(r) = &m.result {
        writeln!(
            s,
            "{:<22} orbitals={} electrons={} ms2={}",
            "system", r.n_orbitals, r.n_electrons, r.ms2
        )
        .unwrap();
    }
    if !m.trace.is_empty() && m.command == CommandKind::Run {
        writeln!(s).unwrap();
        writeln!(
            s,
            "{:>9}  {:>9}  {:>7}  {:>10}  {:>20}  {:>20}",
            "iteration", "dimension", "batches", "violations", "iteration energy/Ha", "best energy/Ha"
        )
        .unwrap();
        for t in &m.trace {
            writeln!(
                s,
                "{:>9}  {:>9}  {:>7}  {:>10.4}  {:>20.12}  {:>20.12}",
                t.iteration, t.subspace_dimension, t.batches, t.violation_fraction, t.iteration_energy, t.energy
            )
            .unwrap();
        }
    }
    if let Some(r) = &m.result {
        writeln!(s).unwrap();
        writeln!(s, "{:<22} {:.12}", "energy/Ha", r.energy).unwrap();
        writeln!(s, "{:<22} {}", "dimension", r.subspace_dimension).unwrap();
        writeln!(s, "{:<22} {}", "converged", yes_no(r.converged)).unwrap();
    }
    if let Some(b) = &m.binding {
        writeln!(s).unwrap();
        writeln!(s, "{:<12} {:>20}  {:>9}  {:>9}", "role", "energy/Ha", "dimension", "converged").unwrap();
        for c in &m.components {
            writeln!(
                s,
                "{:<12} {:>20.12}  {:>9}  {:>9}",
                c.role,
                c.result.energy,
                c.result.subspace_dimension,
                yes_no(c.result.converged)
            )
            .unwrap();
        }
        writeln!(s).unwrap();
        writeln!(s, "{:<8} {:>20}  {:>18}  {:>12}", "Method", "E_binding/Ha", "E_binding/kcal/mol", "E_binding/eV").unwrap();
        writeln!(
            s,
            "{:<8} {:>20.12}  {:>18.2}  {:>12.3}",
            b.method_label, b.e_binding_hartree, b.e_binding_kcal_mol, b.e_binding_ev
        )
        .unwrap();
        for w in b.warnings() {
            writeln!(s, "warning: {w}").unwrap();
        }
    }
    s
}
