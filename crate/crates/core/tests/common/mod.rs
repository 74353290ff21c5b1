//! Shared fixtures and independent oracles for the integration tests.
//!
//! The oracles here deliberately avoid the library's Slater–Condon kernels
//! and eigensolver: the Hamiltonian matrix is built from explicit
//! creation/annihilation operator action on spin-orbital occupation
//! vectors, and eigenvalues come from a cyclic Jacobi iteration.

#![allow(dead_code)]

use std::collections::HashMap;

use qsci_core::determinants::Configuration;
use qsci_core::integrals::IntegralTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniformly random integrals with full eightfold symmetry.
pub fn random_table(n: usize, n_electrons: usize, ms2: i64, seed: u64) -> IntegralTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = IntegralTable::new(n, n_electrons, ms2).unwrap();
    t.set_core_energy(rng.random_range(-2.0..2.0));
    for p in 0..n {
        for q in 0..=p {
            t.set_one_body(p, q, rng.random_range(-1.0..1.0)).unwrap();
        }
    }
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    if qsci_core::integrals::canonical_index(p, q, r, s) == [p, q, r, s] {
                        t.set_two_body(p, q, r, s, rng.random_range(-0.5..0.5)).unwrap();
                    }
                }
            }
        }
    }
    t
}

/// Integrals shaped like a small molecule: well separated orbital energies,
/// dominant Coulomb and exchange terms, weak random couplings elsewhere.
pub fn molecular_table(n: usize, n_electrons: usize, ms2: i64, seed: u64) -> IntegralTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = IntegralTable::new(n, n_electrons, ms2).unwrap();
    t.set_core_energy(rng.random_range(-10.0..-5.0));
    let homo = n_electrons.div_ceil(2);
    for p in 0..n {
        let base = if p < homo { -1.6 + 0.25 * p as f64 } else { 0.1 + 0.25 * (p - homo) as f64 };
        t.set_one_body(p, p, base + rng.random_range(-0.05..0.05)).unwrap();
        for q in 0..p {
            t.set_one_body(p, q, rng.random_range(-0.05..0.05)).unwrap();
        }
    }
    for p in 0..n {
        for q in 0..n {
            for r in 0..n {
                for s in 0..n {
                    if qsci_core::integrals::canonical_index(p, q, r, s) == [p, q, r, s] {
                        t.set_two_body(p, q, r, s, rng.random_range(-0.02..0.02)).unwrap();
                    }
                }
            }
        }
    }
    for p in 0..n {
        for q in 0..=p {
            let coulomb = if p == q { rng.random_range(0.55..0.7) } else { rng.random_range(0.35..0.5) };
            t.set_two_body(p, p, q, q, coulomb).unwrap();
            if p != q {
                t.set_two_body(p, q, p, q, rng.random_range(0.03..0.12)).unwrap();
            }
        }
    }
    t
}

/// Spin-orbital index: alpha orbitals first, then beta.
fn occupation_vector(c: &Configuration, n: usize) -> u128 {
    c.alpha as u128 | (c.beta as u128) << n
}

fn annihilate(state: u128, i: usize) -> Option<(u128, f64)> {
    if state >> i & 1 == 0 {
        return None;
    }
    let below = (state & ((1u128 << i) - 1)).count_ones();
    Some((state & !(1u128 << i), if below % 2 == 0 { 1.0 } else { -1.0 }))
}

fn create(state: u128, i: usize) -> Option<(u128, f64)> {
    if state >> i & 1 == 1 {
        return None;
    }
    let below = (state & ((1u128 << i) - 1)).count_ones();
    Some((state | 1u128 << i, if below % 2 == 0 { 1.0 } else { -1.0 }))
}

/// Apply an operator string, rightmost operator first. `(index, true)` is a
/// creator, `(index, false)` an annihilator.
fn apply(ops: &[(usize, bool)], state: u128) -> Option<(u128, f64)> {
    let mut s = state;
    let mut sign = 1.0;
    for &(i, dagger) in ops.iter().rev() {
        let (next, phase) = if dagger { create(s, i)? } else { annihilate(s, i)? };
        s = next;
        sign *= phase;
    }
    Some((s, sign))
}

/// Dense `<b_i|H|b_j>` from explicit second-quantised operator action:
/// `H = E_core + sum h_pq a+_p a_q + 1/2 sum (pq|rs) a+_p a+_r a_s a_q`
/// over spin orbitals with spin conserved on each electron.
pub fn operator_matrix(t: &IntegralTable, basis: &[Configuration]) -> Vec<Vec<f64>> {
    let n = t.n_orbitals();
    let dim = basis.len();
    let index: HashMap<u128, usize> = basis
        .iter()
        .enumerate()
        .map(|(i, c)| (occupation_vector(c, n), i))
        .collect();
    let mut m = vec![vec![0.0; dim]; dim];
    let so = |orb: usize, spin: usize| orb + spin * n;
    for (col, c) in basis.iter().enumerate() {
        let ket = occupation_vector(c, n);
        m[col][col] += t.core_energy();
        for p in 0..n {
            for q in 0..n {
                let h = t.get_one_body(p, q).unwrap();
                if h == 0.0 {
                    continue;
                }
                for spin in 0..2 {
                    if let Some((bra, sign)) = apply(&[(so(p, spin), true), (so(q, spin), false)], ket) {
                        if let Some(&row) = index.get(&bra) {
                            m[row][col] += sign * h;
                        }
                    }
                }
            }
        }
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        let g = t.get_two_body(p, q, r, s).unwrap();
                        if g == 0.0 {
                            continue;
                        }
                        for sigma in 0..2 {
                            for tau in 0..2 {
                                let ops = [
                                    (so(p, sigma), true),
                                    (so(r, tau), true),
                                    (so(s, tau), false),
                                    (so(q, sigma), false),
                                ];
                                if let Some((bra, sign)) = apply(&ops, ket) {
                                    if let Some(&row) = index.get(&bra) {
                                        m[row][col] += 0.5 * sign * g;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    m
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Lowest eigenvalue of the operator matrix over `basis`.
pub fn oracle_ground_energy(t: &IntegralTable, basis: &[Configuration]) -> f64 {
    jacobi_eigenvalues(&operator_matrix(t, basis))[0]
}

/// Two-site Hubbard model: hopping `-hop`, on-site repulsion `u`, site
/// energies `eps`. Half filled, singlet.
pub fn hubbard_dimer(hop: f64, u: f64, eps: [f64; 2], core: f64) -> IntegralTable {
    let mut t = IntegralTable::new(2, 2, 0).unwrap();
    t.set_core_energy(core);
    t.set_one_body(0, 0, eps[0]).unwrap();
    t.set_one_body(1, 1, eps[1]).unwrap();
    t.set_one_body(0, 1, -hop).unwrap();
    t.set_two_body(0, 0, 0, 0, u).unwrap();
    t.set_two_body(1, 1, 1, 1, u).unwrap();
    t
}

/// The two fragments side by side with no coupling: orbitals of `a` first,
/// then those of `b`; electrons and core energies add.
pub fn block_diagonal(a: &IntegralTable, b: &IntegralTable) -> IntegralTable {
    let (na, nb) = (a.n_orbitals(), b.n_orbitals());
    let mut t = IntegralTable::new(na + nb, a.n_electrons() + b.n_electrons(), a.ms2() + b.ms2()).unwrap();
    t.set_core_energy(a.core_energy() + b.core_energy());
    for (src, off) in [(a, 0), (b, na)] {
        for p in 0..src.n_orbitals() {
            for q in 0..src.n_orbitals() {
                t.set_one_body(p + off, q + off, src.get_one_body(p, q).unwrap()).unwrap();
            }
        }
        for ([p, q, r, s], v) in src.two_body_entries() {
            t.set_two_body(p + off, q + off, r + off, s + off, v).unwrap();
        }
    }
    t
}

/// Synthetic shots from the exact ground state of `t`.
pub fn ground_state_samples(
    t: &IntegralTable,
    shots: u64,
    noise: f64,
    seed: u64,
) -> qsci_core::sampling::SampleSet {
    let gs = qsci_core::run_casci(t).unwrap();
    let state: Vec<(Configuration, f64)> = gs.basis.into_iter().zip(gs.coefficients).collect();
    let spec = qsci_core::sampling::NoiseSpec::new(noise, seed).unwrap();
    qsci_core::sampling::sample_from_state(&state, t.n_orbitals(), shots, &spec).unwrap()
}

/// Every configuration of the space exactly once, as a sample set.
pub fn full_space_samples(t: &IntegralTable) -> qsci_core::sampling::SampleSet {
    let (na, nb) = t.electron_split().unwrap();
    let n = t.n_orbitals();
    let space = qsci_core::determinants::enumerate_full_space(n, na, nb).unwrap();
    qsci_core::sampling::SampleSet::from_counts(
        n,
        space.iter().map(|c| (c.to_bitstring(n), 1)),
        qsci_core::sampling::SampleSource::Synthetic,
        None,
    )
    .unwrap()
}
