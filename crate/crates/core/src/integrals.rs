//! Active-space molecular integrals and the FCIDUMP interchange format.
//!
//! Two-electron integrals are held in chemists' notation `(pq|rs)` with the
//! usual eightfold permutational symmetry. Storage is a sparse map keyed by
//! the lexicographically smallest member of each symmetry class; a dense
//! `n^4` cache is built alongside it for small orbital counts so the
//! Slater–Condon kernels can index without hashing.
//!
//! All indices are 0-based. The 1-based FCIDUMP convention is converted at
//! the parse/write boundary only.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

/// Largest orbital count for which the dense two-electron cache is built.
const DENSE_CACHE_MAX_ORBITALS: usize = 24;

/// Largest supported orbital count (one machine word per spin block).
pub const MAX_ORBITALS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegralError {
    #[error("line {line}: malformed FCIDUMP header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: orbital index {index} out of range (NORB = {n_orbitals})")]
    IndexOutOfRange {
        line: usize,
        index: usize,
        n_orbitals: usize,
    },
    #[error("orbital index {index} out of range for {n_orbitals} orbitals")]
    AccessOutOfRange { index: usize, n_orbitals: usize },
    #[error("{n_orbitals} orbitals exceeds the supported maximum of {MAX_ORBITALS}")]
    TooManyOrbitals { n_orbitals: usize },
    #[error("electron count {n_electrons} and MS2 {ms2} are inconsistent with {n_orbitals} orbitals")]
    InconsistentElectrons {
        n_electrons: usize,
        ms2: i64,
        n_orbitals: usize,
    },
}

/// Canonical representative of a two-electron symmetry class.
pub fn canonical_index(p: usize, q: usize, r: usize, s: usize) -> [usize; 4] {
    [
        [p, q, r, s],
        [q, p, r, s],
        [p, q, s, r],
        [q, p, s, r],
        [r, s, p, q],
        [s, r, p, q],
        [r, s, q, p],
        [s, r, q, p],
    ]
    .into_iter()
    .min()
    .expect("eight permutations")
}

/// Active-space Hamiltonian parameters: core energy, one-body `h[p][q]` and
/// two-body `(pq|rs)` integrals in Hartree.
#[derive(Debug, Clone)]
pub struct IntegralTable {
    n_orbitals: usize,
    n_electrons: usize,
    ms2: i64,
    core_energy: f64,
    one_body: Vec<f64>,
    two_body: BTreeMap<[usize; 4], f64>,
    dense: Option<Vec<f64>>,
}

impl PartialEq for IntegralTable {
    fn eq(&self, other: &Self) -> bool {
        self.n_orbitals == other.n_orbitals
            && self.n_electrons == other.n_electrons
            && self.ms2 == other.ms2
            && self.core_energy.to_bits() == other.core_energy.to_bits()
            && self.one_body.len() == other.one_body.len()
            && self
                .one_body
                .iter()
                .zip(&other.one_body)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self.two_body.len() == other.two_body.len()
            && self
                .two_body
                .iter()
                .zip(&other.two_body)
                .all(|((ka, va), (kb, vb))| ka == kb && va.to_bits() == vb.to_bits())
    }
}

impl IntegralTable {
    /// An all-zero table.
    pub fn new(n_orbitals: usize, n_electrons: usize, ms2: i64) -> Result<Self, IntegralError> {
        if n_orbitals > MAX_ORBITALS {
            return Err(IntegralError::TooManyOrbitals { n_orbitals });
        }
        let dense = (n_orbitals <= DENSE_CACHE_MAX_ORBITALS)
            .then(|| vec![0.0; n_orbitals.pow(4)]);
        Ok(Self {
            n_orbitals,
            n_electrons,
            ms2,
            core_energy: 0.0,
            one_body: vec![0.0; n_orbitals * n_orbitals],
            two_body: BTreeMap::new(),
            dense,
        })
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn ms2(&self) -> i64 {
        self.ms2
    }

    pub fn core_energy(&self) -> f64 {
        self.core_energy
    }

    pub fn set_core_energy(&mut self, value: f64) {
        self.core_energy = value;
    }

    /// Split the electron count into `(n_alpha, n_beta)` using MS2.
    pub fn electron_split(&self) -> Result<(usize, usize), IntegralError> {
        let n = self.n_electrons as i64;
        let bad = || IntegralError::InconsistentElectrons {
            n_electrons: self.n_electrons,
            ms2: self.ms2,
            n_orbitals: self.n_orbitals,
        };
        if (n + self.ms2) % 2 != 0 || self.ms2.abs() > n {
            return Err(bad());
        }
        let n_alpha = ((n + self.ms2) / 2) as usize;
        let n_beta = ((n - self.ms2) / 2) as usize;
        if n_alpha > self.n_orbitals || n_beta > self.n_orbitals {
            return Err(bad());
        }
        Ok((n_alpha, n_beta))
    }

    fn check(&self, index: usize) -> Result<(), IntegralError> {
        if index >= self.n_orbitals {
            Err(IntegralError::AccessOutOfRange {
                index,
                n_orbitals: self.n_orbitals,
            })
        } else {
            Ok(())
        }
    }

    pub fn get_one_body(&self, p: usize, q: usize) -> Result<f64, IntegralError> {
        self.check(p)?;
        self.check(q)?;
        Ok(self.one_body[p * self.n_orbitals + q])
    }

    /// Store `h[p][q] = h[q][p] = value`.
    pub fn set_one_body(&mut self, p: usize, q: usize, value: f64) -> Result<(), IntegralError> {
        self.check(p)?;
        self.check(q)?;
        let n = self.n_orbitals;
        self.one_body[p * n + q] = value;
        self.one_body[q * n + p] = value;
        Ok(())
    }

    pub fn get_two_body(&self, p: usize, q: usize, r: usize, s: usize) -> Result<f64, IntegralError> {
        for i in [p, q, r, s] {
            self.check(i)?;
        }
        Ok(self.eri(p, q, r, s))
    }

    /// Store `(pq|rs)` and every permutation-equivalent element. Returns the
    /// previously stored value of the class, if any. Exact zeros are not
    /// kept in the sparse map.
    pub fn set_two_body(
        &mut self,
        p: usize,
        q: usize,
        r: usize,
        s: usize,
        value: f64,
    ) -> Result<Option<f64>, IntegralError> {
        for i in [p, q, r, s] {
            self.check(i)?;
        }
        let key = canonical_index(p, q, r, s);
        let previous = if value == 0.0 {
            self.two_body.remove(&key)
        } else {
            self.two_body.insert(key, value)
        };
        if let Some(dense) = self.dense.as_mut() {
            let n = self.n_orbitals;
            let [p, q, r, s] = key;
            for [a, b, c, d] in [
                [p, q, r, s],
                [q, p, r, s],
                [p, q, s, r],
                [q, p, s, r],
                [r, s, p, q],
                [s, r, p, q],
                [r, s, q, p],
                [s, r, q, p],
            ] {
                dense[((a * n + b) * n + c) * n + d] = value;
            }
        }
        Ok(previous)
    }

    /// Unchecked two-electron lookup for the matrix-element kernels.
    #[inline]
    pub(crate) fn eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        match &self.dense {
            Some(dense) => {
                let n = self.n_orbitals;
                dense[((p * n + q) * n + r) * n + s]
            }
            None => self
                .two_body
                .get(&canonical_index(p, q, r, s))
                .copied()
                .unwrap_or(0.0),
        }
    }

    #[inline]
    pub(crate) fn h(&self, p: usize, q: usize) -> f64 {
        self.one_body[p * self.n_orbitals + q]
    }

    /// Stored two-electron classes in canonical order.
    pub fn two_body_entries(&self) -> impl Iterator<Item = ([usize; 4], f64)> + '_ {
        self.two_body.iter().map(|(k, v)| (*k, *v))
    }

    pub fn two_body_len(&self) -> usize {
        self.two_body.len()
    }
}

/// Parse an FCIDUMP text.
pub fn parse_fcidump(text: &str) -> Result<IntegralTable, IntegralError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();

    // Header: namelist, terminated by `&END` or `/`. A bare `KEY=VALUE`
    // header without terminator ends at the first numeric record.
    let mut header = String::new();
    let mut header_end_line = 0;
    while let Some(&(line_no, line)) = lines.peek() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            lines.next();
            continue;
        }
        if !header.is_empty() && starts_with_number(trimmed) {
            break;
        }
        lines.next();
        header_end_line = line_no;
        let upper = trimmed.to_ascii_uppercase();
        if let Some(pos) = upper.find("&END") {
            header.push_str(&upper[..pos]);
            break;
        }
        if upper == "/" || upper.ends_with('/') {
            header.push_str(upper.trim_end_matches('/'));
            break;
        }
        header.push_str(&upper);
        header.push(' ');
    }
    let keys = parse_namelist(&header);
    let get_int = |key: &str| -> Result<Option<i64>, IntegralError> {
        match keys.get(key).and_then(|v| v.first()) {
            None => Ok(None),
            Some(v) => v.parse::<i64>().map(Some).map_err(|_| IntegralError::MalformedHeader {
                line: header_end_line,
                reason: format!("{key} value {v:?} is not an integer"),
            }),
        }
    };
    let missing = |key: &str| IntegralError::MalformedHeader {
        line: header_end_line,
        reason: format!("missing {key}"),
    };
    let norb = get_int("NORB")?.ok_or_else(|| missing("NORB"))?;
    let nelec = get_int("NELEC")?.ok_or_else(|| missing("NELEC"))?;
    let ms2 = get_int("MS2")?.unwrap_or(0);
    if norb < 0 || nelec < 0 {
        return Err(IntegralError::MalformedHeader {
            line: header_end_line,
            reason: "NORB and NELEC must be non-negative".into(),
        });
    }
    let n_orbitals = norb as usize;
    let mut table = IntegralTable::new(n_orbitals, nelec as usize, ms2).map_err(|_| {
        IntegralError::MalformedHeader {
            line: header_end_line,
            reason: format!("NORB = {norb} exceeds the supported maximum of {MAX_ORBITALS}"),
        }
    })?;
    let mut one_body_seen = BTreeMap::new();
    let mut core_seen = false;

    for (line_no, line) in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(IntegralError::MalformedRecord {
                line: line_no,
                reason: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let value = parse_real(fields[0]).ok_or_else(|| IntegralError::MalformedRecord {
            line: line_no,
            reason: format!("unparseable value {:?}", fields[0]),
        })?;
        let mut idx = [0usize; 4];
        for (slot, token) in idx.iter_mut().zip(&fields[1..]) {
            let v: usize = token.parse().map_err(|_| IntegralError::MalformedRecord {
                line: line_no,
                reason: format!("unparseable index {token:?}"),
            })?;
            if v > n_orbitals {
                return Err(IntegralError::IndexOutOfRange {
                    line: line_no,
                    index: v,
                    n_orbitals,
                });
            }
            *slot = v;
        }
        match idx {
            [0, 0, 0, 0] => {
                if core_seen {
                    log::warn!("line {line_no}: duplicate core energy record, keeping the last");
                }
                core_seen = true;
                table.set_core_energy(value);
            }
            [i, 0, 0, 0] if i > 0 => {
                // orbital energies; not part of the Hamiltonian
            }
            [i, j, 0, 0] if i > 0 && j > 0 => {
                let key = (i.max(j), i.min(j));
                if one_body_seen.insert(key, ()).is_some() {
                    log::warn!("line {line_no}: duplicate one-body entry ({i},{j}), keeping the last");
                }
                table
                    .set_one_body(i - 1, j - 1, value)
                    .expect("indices validated");
            }
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                let previous = table
                    .set_two_body(i - 1, j - 1, k - 1, l - 1, value)
                    .expect("indices validated");
                if previous.is_some() {
                    log::warn!(
                        "line {line_no}: duplicate two-body entry ({i}{j}|{k}{l}), keeping the last"
                    );
                }
            }
            _ => {
                return Err(IntegralError::MalformedRecord {
                    line: line_no,
                    reason: format!("invalid index pattern {idx:?}"),
                })
            }
        }
    }
    Ok(table)
}

fn starts_with_number(line: &str) -> bool {
    line.split_whitespace()
        .next()
        .is_some_and(|tok| parse_real(tok).is_some())
}

/// Locale-independent real parse accepting Fortran `D` exponents.
fn parse_real(token: &str) -> Option<f64> {
    let normalised: String = token
        .chars()
        .map(|c| if c == 'D' || c == 'd' { 'E' } else { c })
        .collect();
    if !normalised
        .chars()
        .all(|c| c.is_ascii_digit() || matches!(c, '.' | 'E' | 'e' | '+' | '-'))
    {
        return None;
    }
    normalised.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_namelist(header: &str) -> BTreeMap<String, Vec<String>> {
    let cleaned = header.replace("&FCI", " ").replace(',', " ").replace('=', " = ");
    let tokens: Vec<&str> = cleaned.split_whitespace().collect();
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut current: Option<String> = None;
    let mut i = 0;
    while i < tokens.len() {
        if tokens.get(i + 1) == Some(&"=") {
            let key = tokens[i].to_string();
            out.entry(key.clone()).or_default().clear();
            current = Some(key);
            i += 2;
            continue;
        }
        if let Some(key) = &current {
            out.get_mut(key).expect("key inserted").push(tokens[i].to_string());
        }
        i += 1;
    }
    out
}

fn fmt_real(v: f64) -> String {
    // Debug formatting is the shortest representation that round-trips.
    format!("{v:?}")
}

/// Serialise a table to FCIDUMP text, one representative per symmetry class.
pub fn write_fcidump(table: &IntegralTable) -> String {
    let n = table.n_orbitals;
    let mut out = String::new();
    let orbsym = vec!["1"; n].join(",");
    writeln!(
        out,
        "&FCI NORB={},NELEC={},MS2={},",
        n, table.n_electrons, table.ms2
    )
    .unwrap();
    if n > 0 {
        writeln!(out, "  ORBSYM={orbsym},").unwrap();
    }
    writeln!(out, "  ISYM=1,").unwrap();
    writeln!(out, "&END").unwrap();
    for ([p, q, r, s], v) in table.two_body_entries() {
        writeln!(out, "{} {} {} {} {}", fmt_real(v), p + 1, q + 1, r + 1, s + 1).unwrap();
    }
    for p in 0..n {
        for q in 0..=p {
            let v = table.h(p, q);
            if v != 0.0 {
                writeln!(out, "{} {} {} 0 0", fmt_real(v), p + 1, q + 1).unwrap();
            }
        }
    }
    writeln!(out, "{} 0 0 0 0", fmt_real(table.core_energy)).unwrap();
    out
}
