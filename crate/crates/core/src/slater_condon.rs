//! Hamiltonian matrix elements between determinants and assembly of the
//! sparse symmetric subspace Hamiltonian.

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::determinants::{bits, excitation_degree, phase_in_mask, Configuration};
use crate::integrals::IntegralTable;

/// Off-diagonal elements smaller than this (Hartree) are not stored.
pub const DROP_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlaterCondonError {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("non-finite matrix element at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

/// `<c|H|c>` including the core energy.
pub fn diagonal_element(c: &Configuration, t: &IntegralTable) -> f64 {
    let alpha: Vec<usize> = bits(c.alpha).collect();
    let beta: Vec<usize> = bits(c.beta).collect();
    let mut e = t.core_energy();
    for &i in alpha.iter().chain(&beta) {
        e += t.h(i, i);
    }
    for occ in [&alpha, &beta] {
        for (n, &i) in occ.iter().enumerate() {
            for &j in &occ[..n] {
                e += t.eri(i, i, j, j) - t.eri(i, j, j, i);
            }
        }
    }
    for &i in &alpha {
        for &j in &beta {
            e += t.eri(i, i, j, j);
        }
    }
    e
}

#[inline]
fn single_hole_particle(from: u64, to: u64) -> (usize, usize) {
    let hole = (from & !to).trailing_zeros() as usize;
    let particle = (to & !from).trailing_zeros() as usize;
    (hole, particle)
}

fn single_element(same: u64, other: u64, hole: usize, particle: usize, t: &IntegralTable) -> f64 {
    let phase = phase_in_mask(same, hole, particle);
    let mut v = t.h(hole, particle);
    for k in bits(same) {
        v += t.eri(hole, particle, k, k) - t.eri(hole, k, k, particle);
    }
    for k in bits(other) {
        v += t.eri(hole, particle, k, k);
    }
    phase * v
}

/// `<a|H|b>` for `a != b`. Zero beyond double excitations.
pub fn offdiagonal_element(a: &Configuration, b: &Configuration, t: &IntegralTable) -> f64 {
    let (da, db) = excitation_degree(a, b);
    match (da, db) {
        (1, 0) => {
            let (p, q) = single_hole_particle(a.alpha, b.alpha);
            single_element(a.alpha, a.beta, p, q, t)
        }
        (0, 1) => {
            let (p, q) = single_hole_particle(a.beta, b.beta);
            single_element(a.beta, a.alpha, p, q, t)
        }
        (1, 1) => {
            let (i, k) = single_hole_particle(a.alpha, b.alpha);
            let (j, l) = single_hole_particle(a.beta, b.beta);
            phase_in_mask(a.alpha, i, k) * phase_in_mask(a.beta, j, l) * t.eri(i, k, j, l)
        }
        (2, 0) => same_spin_double(a.alpha, b.alpha, t),
        (0, 2) => same_spin_double(a.beta, b.beta, t),
        _ => 0.0,
    }
}

fn same_spin_double(from: u64, to: u64, t: &IntegralTable) -> f64 {
    let mut holes = bits(from & !to);
    let mut particles = bits(to & !from);
    let (i, j) = (holes.next().unwrap(), holes.next().unwrap());
    let (k, l) = (particles.next().unwrap(), particles.next().unwrap());
    // lowest hole to lowest particle first, then the second pair on the
    // intermediate determinant
    let first = phase_in_mask(from, i, k);
    let intermediate = from & !(1 << i) | 1 << k;
    let second = phase_in_mask(intermediate, j, l);
    first * second * (t.eri(i, k, j, l) - t.eri(i, l, j, k))
}

/// Sparse symmetric Hamiltonian over an ordered configuration basis. Only
/// the strict upper triangle is stored off the diagonal; the core energy is
/// folded into the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceHamiltonian {
    configurations: Vec<Configuration>,
    diagonal: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    values: Vec<f64>,
}

impl SubspaceHamiltonian {
    pub fn dimension(&self) -> usize {
        self.configurations.len()
    }

    pub fn configurations(&self) -> &[Configuration] {
        &self.configurations
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    /// Number of stored off-diagonal elements (upper triangle).
    pub fn off_diagonal_len(&self) -> usize {
        self.values.len()
    }

    /// Stored upper-triangle entries `(row, col, value)` with `row <= col`,
    /// diagonal included.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dimension()).flat_map(move |i| {
            std::iter::once((i, i, self.diagonal[i])).chain(
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(move |k| (i, self.cols[k] as usize, self.values[k])),
            )
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row == col {
            return self.diagonal[row];
        }
        let (i, j) = if row < col { (row, col) } else { (col, row) };
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// `y = H x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dimension();
        assert_eq!(x.len(), n);
        assert_eq!(y.len(), n);
        for i in 0..n {
            y[i] = self.diagonal[i] * x[i];
        }
        for i in 0..n {
            let xi = x[i];
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k] as usize;
                let v = self.values[k];
                acc += v * x[j];
                y[j] += v * xi;
            }
            y[i] += acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dimension();
        let mut m = DMatrix::zeros(n, n);
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }

    /// Wrap an explicit symmetric matrix; the upper triangle is used.
    /// `labels` must have one entry per row.
    pub fn from_dense(labels: Vec<Configuration>, m: &DMatrix<f64>) -> Self {
        let n = labels.len();
        assert_eq!(m.nrows(), n);
        assert_eq!(m.ncols(), n);
        let rows: Vec<Vec<(u32, f64)>> = (0..n)
            .map(|i| {
                ((i + 1)..n)
                    .filter(|&j| m[(i, j)] != 0.0)
                    .map(|j| (j as u32, m[(i, j)]))
                    .collect()
            })
            .collect();
        let diagonal = (0..n).map(|i| m[(i, i)]).collect();
        Self::from_rows(labels, diagonal, rows)
    }

    fn from_rows(
        configurations: Vec<Configuration>,
        diagonal: Vec<f64>,
        rows: Vec<Vec<(u32, f64)>>,
    ) -> Self {
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for (j, v) in row {
                cols.push(j);
                values.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            configurations,
            diagonal,
            row_ptr,
            cols,
            values,
        }
    }
}

/// Assemble the Hamiltonian over `basis`, which must be strictly increasing
/// in canonical order and share one `(n_alpha, n_beta)`.
pub fn build_subspace_hamiltonian(
    basis: &[Configuration],
    t: &IntegralTable,
) -> Result<SubspaceHamiltonian, SlaterCondonError> {
    if let Some(first) = basis.first() {
        let (na, nb) = (first.n_alpha(), first.n_beta());
        if let Some(bad) = basis.iter().find(|c| !c.is_valid_for(na, nb)) {
            return Err(SlaterCondonError::InvalidBasis(format!(
                "mixed particle numbers: {:?} is not ({na}, {nb})",
                bad
            )));
        }
        let width = t.n_orbitals();
        if width < 64 && basis.iter().any(|c| (c.alpha | c.beta) >> width != 0) {
            return Err(SlaterCondonError::InvalidBasis(format!(
                "configuration occupies orbitals beyond {width}"
            )));
        }
    }
    for w in basis.windows(2) {
        if w[0] == w[1] {
            return Err(SlaterCondonError::InvalidBasis(format!(
                "duplicate configuration {:?}",
                w[0]
            )));
        }
        if w[0] > w[1] {
            return Err(SlaterCondonError::InvalidBasis(
                "configurations are not in canonical order".into(),
            ));
        }
    }
    if basis.len() > u32::MAX as usize {
        return Err(SlaterCondonError::InvalidBasis("basis too large".into()));
    }

    // Alpha-major order makes each distinct alpha string a contiguous block.
    let mut groups: Vec<(u64, usize, usize)> = Vec::new();
    for (idx, c) in basis.iter().enumerate() {
        match groups.last_mut() {
            Some((alpha, _, end)) if *alpha == c.alpha => *end = idx + 1,
            _ => groups.push((c.alpha, idx, idx + 1)),
        }
    }

    let diagonal: Vec<f64> = basis.par_iter().map(|c| diagonal_element(c, t)).collect();
    if let Some(i) = diagonal.iter().position(|v| !v.is_finite()) {
        return Err(SlaterCondonError::NonFinite { row: i, col: i });
    }

    let rows: Vec<Vec<(u32, f64)>> = (0..basis.len())
        .into_par_iter()
        .map(|i| {
            let a = &basis[i];
            let mut row = Vec::new();
            for &(alpha, start, end) in &groups {
                if end <= i + 1 {
                    continue;
                }
                let alpha_bits = (a.alpha ^ alpha).count_ones();
                if alpha_bits > 4 {
                    continue;
                }
                for (j, b) in basis.iter().enumerate().take(end).skip(start.max(i + 1)) {
                    if alpha_bits + (a.beta ^ b.beta).count_ones() > 4 {
                        continue;
                    }
                    let v = offdiagonal_element(a, b, t);
                    if v.abs() >= DROP_THRESHOLD || !v.is_finite() {
                        row.push((j as u32, v));
                    }
                }
            }
            row
        })
        .collect();
    for (i, row) in rows.iter().enumerate() {
        if let Some(&(j, _)) = row.iter().find(|(_, v)| !v.is_finite()) {
            return Err(SlaterCondonError::NonFinite {
                row: i,
                col: j as usize,
            });
        }
    }
    Ok(SubspaceHamiltonian::from_rows(basis.to_vec(), diagonal, rows))
}
