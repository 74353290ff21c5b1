//! `--config FILE`: TOML key=value pairs whose keys are flag names.
//!
//! The file is expanded into ordinary flags and spliced in directly after
//! the subcommand, so anything given on the command line comes later and
//! wins.

use std::ffi::OsString;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Flags from a config file, sorted by key.
pub fn config_flags(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    flags_from_str(&text).with_context(|| format!("in config file {}", path.display()))
}

pub fn flags_from_str(text: &str) -> Result<Vec<OsString>> {
    let table: toml::Table = toml::from_str(text)?;
    let mut out = Vec::new();
    for (key, value) in table {
        if key == "config" {
            bail!("a config file cannot name another config file");
        }
        let flag = OsString::from(format!("--{key}"));
        match value {
            toml::Value::Boolean(true) => out.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => out.extend([flag, s.into()]),
            toml::Value::Integer(i) => out.extend([flag, i.to_string().into()]),
            toml::Value::Float(f) => out.extend([flag, format!("{f:?}").into()]),
            other => bail!("key {key:?}: unsupported value {other}"),
        }
    }
    Ok(out)
}

/// Find the `--config` path in raw arguments, if any.
fn config_path(args: &[OsString]) -> Result<Option<OsString>> {
    let mut found = None;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            match it.next() {
                Some(p) => found = Some(p.clone()),
                None => bail!("--config requires a path"),
            }
        } else if let Some(p) = s.strip_prefix("--config=") {
            found = Some(p.into());
        }
    }
    Ok(found)
}

/// Raw argv with any config-file flags inserted after the subcommand.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args)? else {
        return Ok(args);
    };
    let flags = config_flags(Path::new(&path))?;
    let at = args
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, a)| !a.to_string_lossy().starts_with('-'))
        .map(|(i, _)| i + 1)
        .unwrap_or(args.len());
    let mut out = args[..at].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[at..]);
    Ok(out)
}
