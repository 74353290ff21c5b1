//! Lowest eigenpair of the subspace Hamiltonian.
//!
//! Dimensions up to [`SolverOptions::dense_cap`] go through a dense
//! symmetric eigendecomposition. Larger problems use a Davidson iteration
//! with a diagonal preconditioner, started from the unit vector on the
//! configuration with the lowest diagonal element, and collapsed to the
//! current and previous Ritz vectors every `collapse_every` expansions.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::slater_condon::SubspaceHamiltonian;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 500;
pub const DEFAULT_DENSE_CAP: usize = 2048;
pub const DEFAULT_COLLAPSE_EVERY: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    pub energy: f64,
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("eigensolver did not converge: residual {} after {} iterations", best.residual_norm, best.iterations)]
    NotConverged { best: Box<GroundState> },
    #[error("cannot diagonalise a zero-dimensional matrix")]
    DimensionZero,
    #[error("dimension {dimension} exceeds the dense cap of {cap}")]
    DimensionTooLarge { dimension: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Residual tolerance, relative to `max(1, |E|)`.
    pub tol: f64,
    pub max_iter: usize,
    pub dense_cap: usize,
    pub collapse_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITERATIONS,
            dense_cap: DEFAULT_DENSE_CAP,
            collapse_every: DEFAULT_COLLAPSE_EVERY,
        }
    }
}

/// Lowest eigenpair with default dense cap and collapse interval.
pub fn ground_state(
    h: &SubspaceHamiltonian,
    tol: f64,
    max_iter: usize,
) -> Result<GroundState, EigenError> {
    ground_state_with(
        h,
        &SolverOptions {
            tol,
            max_iter,
            ..SolverOptions::default()
        },
    )
}

pub fn ground_state_with(
    h: &SubspaceHamiltonian,
    opts: &SolverOptions,
) -> Result<GroundState, EigenError> {
    if h.dimension() == 0 {
        return Err(EigenError::DimensionZero);
    }
    assert!(opts.tol > 0.0, "tolerance must be positive");
    if h.dimension() <= opts.dense_cap {
        dense_ground_state(h, opts.tol)
    } else {
        davidson(h, opts)
    }
}

/// Ascending eigenvalues through a dense decomposition.
pub fn dense_spectrum(h: &SubspaceHamiltonian) -> Result<Vec<f64>, EigenError> {
    dense_spectrum_capped(h, DEFAULT_DENSE_CAP)
}

pub fn dense_spectrum_capped(h: &SubspaceHamiltonian, cap: usize) -> Result<Vec<f64>, EigenError> {
    let n = h.dimension();
    if n > cap {
        return Err(EigenError::DimensionTooLarge { dimension: n, cap });
    }
    let mut values: Vec<f64> = SymmetricEigen::new(h.to_dense()).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

fn dense_ground_state(h: &SubspaceHamiltonian, tol: f64) -> Result<GroundState, EigenError> {
    let eig = SymmetricEigen::new(h.to_dense());
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    normalise(&mut v);
    fix_sign(&mut v);
    finish(h, v, 1, tol)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalise(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Largest-magnitude component positive; first index wins ties.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Rayleigh quotient and explicit residual of the final vector.
fn finish(
    h: &SubspaceHamiltonian,
    v: Vec<f64>,
    iterations: usize,
    tol: f64,
) -> Result<GroundState, EigenError> {
    let mut hv = vec![0.0; v.len()];
    h.matvec(&v, &mut hv);
    let energy = dot(&v, &hv);
    let residual_norm = hv
        .iter()
        .zip(&v)
        .map(|(a, b)| (a - energy * b).powi(2))
        .sum::<f64>()
        .sqrt();
    let state = GroundState {
        energy,
        coefficients: v,
        iterations,
        residual_norm,
    };
    if residual_norm <= tol * energy.abs().max(1.0) {
        Ok(state)
    } else {
        Err(EigenError::NotConverged {
            best: Box::new(state),
        })
    }
}

/// Orthogonalise `t` against `basis` (two classical Gram–Schmidt passes).
fn orthogonalise(t: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for b in basis {
            let c = dot(t, b);
            t.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    normalise(t)
}

fn davidson(h: &SubspaceHamiltonian, opts: &SolverOptions) -> Result<GroundState, EigenError> {
    let n = h.dimension();
    let diag = h.diagonal();
    let start = diag
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty");

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut projected: Vec<Vec<f64>> = Vec::new();

    let push = |v: Vec<f64>,
                basis: &mut Vec<Vec<f64>>,
                images: &mut Vec<Vec<f64>>,
                projected: &mut Vec<Vec<f64>>| {
        let mut hv = vec![0.0; n];
        h.matvec(&v, &mut hv);
        let row: Vec<f64> = basis.iter().map(|b| dot(b, &hv)).collect();
        for (r, value) in projected.iter_mut().zip(&row) {
            r.push(*value);
        }
        let mut own = row;
        own.push(dot(&v, &hv));
        projected.push(own);
        basis.push(v);
        images.push(hv);
    };

    let mut e0 = vec![0.0; n];
    e0[start] = 1.0;
    push(e0, &mut basis, &mut images, &mut projected);

    let mut previous_ritz: Option<Vec<f64>> = None;
    let mut expansions = 0;
    let mut best: Option<(f64, Vec<f64>, f64)> = None;

    for iteration in 1..=opts.max_iter {
        let m = basis.len();
        let small = DMatrix::from_fn(m, m, |i, j| {
            // symmetrise the stored projection
            0.5 * (projected[i][j] + projected[j][i])
        });
        let eig = SymmetricEigen::new(small);
        let (k, &theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        let s = eig.eigenvectors.column(k);

        let mut ritz = vec![0.0; n];
        let mut residual = vec![0.0; n];
        for (c, (b, hb)) in s.iter().zip(basis.iter().zip(&images)) {
            for i in 0..n {
                ritz[i] += c * b[i];
                residual[i] += c * hb[i];
            }
        }
        for i in 0..n {
            residual[i] -= theta * ritz[i];
        }
        let rnorm = norm(&residual);
        if best.as_ref().is_none_or(|(_, _, r)| rnorm < *r) {
            best = Some((theta, ritz.clone(), rnorm));
        }
        if rnorm <= opts.tol * theta.abs().max(1.0) || m == n {
            normalise(&mut ritz);
            fix_sign(&mut ritz);
            return finish(h, ritz, iteration, opts.tol);
        }

        // diagonal preconditioner
        let mut correction: Vec<f64> = residual
            .iter()
            .zip(diag)
            .map(|(r, d)| {
                let denom = theta - d;
                let denom = if denom.abs() < 1e-8 {
                    1e-8_f64.copysign(denom)
                } else {
                    denom
                };
                r / denom
            })
            .collect();

        if expansions + 1 >= opts.collapse_every {
            let mut restart = vec![ritz.clone()];
            normalise(&mut restart[0]);
            if let Some(mut prev) = previous_ritz.take() {
                if orthogonalise(&mut prev, &restart) > 1e-8 {
                    restart.push(prev);
                }
            }
            basis.clear();
            images.clear();
            projected.clear();
            for v in restart {
                push(v, &mut basis, &mut images, &mut projected);
            }
            expansions = 0;
        }
        previous_ritz = Some(ritz);

        let mut added = orthogonalise(&mut correction, &basis) > 1e-10;
        if !added {
            // preconditioned direction collapsed; fall back to the raw residual
            correction = residual;
            added = orthogonalise(&mut correction, &basis) > 1e-10;
        }
        if !added {
            break;
        }
        push(correction, &mut basis, &mut images, &mut projected);
        expansions += 1;
    }

    let (_, mut v, _) = best.expect("at least one iteration");
    normalise(&mut v);
    fix_sign(&mut v);
    finish(h, v, opts.max_iter, opts.tol)
}
