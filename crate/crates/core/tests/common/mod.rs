//! Independent dense-matrix oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn pauli_1q(op: char) -> CMat {
    let z = c(0.0);
    let o = c(1.0);
    let i = Complex64::new(0.0, 1.0);
    match op {
        'I' => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => panic!("bad op"),
    }
}

/// Kronecker product of single-qubit matrices, leftmost label first.
pub fn kron_label(label: &str) -> CMat {
    label.chars().fold(DMatrix::from_element(1, 1, c(1.0)), |acc, ch| acc.kronecker(&pauli_1q(ch)))
}

/// Hermitian eigendecomposition (ascending eigenvalues).
pub fn eigh(h: &CMat) -> (Vec<f64>, CMat) {
    let e = h.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[a].partial_cmp(&e.eigenvalues[b]).unwrap());
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = CMat::from_columns(&idx.iter().map(|&i| e.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    (vals, vecs)
}

/// `e^{-itH}` from the spectral decomposition.
pub fn expm_herm(h: &CMat, t: f64) -> CMat {
    let (w, q) = eigh(h);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(w.len(), w.iter().map(|&e| Complex64::from_polar(1.0, -e * t))));
    &q * d * q.adjoint()
}

/// Fermion annihilation operator on mode `m` of `n` modes, by occupation
/// counting: `c_m |n⟩ = (-1)^{Σ_{k<m} n_k} |n - e_m⟩`. Mode 0 is the most
/// significant bit of the basis index.
pub fn annihilate(n: usize, m: usize) -> CMat {
    let dim = 1usize << n;
    let mut a = CMat::zeros(dim, dim);
    for s in 0..dim {
        let bit = 1usize << (n - 1 - m);
        if s & bit == 0 {
            continue;
        }
        let before = (0..m).filter(|&k| s & (1usize << (n - 1 - k)) != 0).count();
        let sign = if before % 2 == 1 { -1.0 } else { 1.0 };
        a[(s ^ bit, s)] = c(sign);
    }
    a
}

/// Dense AIM Hamiltonian from fermion operators, spin-up modes first.
pub fn fermion_aim(n_bath: usize, v: &[f64], eps: &[f64], u: f64, mu: f64) -> CMat {
    let n = 2 * (n_bath + 1);
    let dim = 1usize << n;
    let ann: Vec<CMat> = (0..n).map(|m| annihilate(n, m)).collect();
    let mode = |site: usize, spin: usize| spin * (n_bath + 1) + site;
    let mut h = CMat::zeros(dim, dim);
    for spin in 0..2 {
        for i in 1..=n_bath {
            let c0 = &ann[mode(0, spin)];
            let ci = &ann[mode(i, spin)];
            h += (c0.adjoint() * ci + ci.adjoint() * c0) * c(v[i - 1]);
        }
        for i in 0..=n_bath {
            let ci = &ann[mode(i, spin)];
            h += ci.adjoint() * ci * c(eps[i] - mu);
        }
    }
    let nu = ann[mode(0, 0)].adjoint() * &ann[mode(0, 0)];
    let nd = ann[mode(0, 1)].adjoint() * &ann[mode(0, 1)];
    h += nu * nd * c(u);
    h
}

pub fn traceless(m: &CMat) -> CMat {
    let d = m.nrows();
    let tr = m.trace() / c(d as f64);
    m - CMat::identity(d, d) * tr
}

/// Two-site model built label by label.
pub fn two_site_dense(u: f64, v: f64) -> CMat {
    (kron_label("XXII") + kron_label("YYII") + kron_label("IIXX") + kron_label("IIYY")) * c(v / 2.0) + kron_label("ZIZI") * c(u / 4.0)
}

/// Poles `(ω, α)` of `iG(t) = Σ 2α cos(ωt)` for `⟨X0(t) X0⟩` in the ground state.
pub fn lehmann(u: f64, v: f64) -> Vec<(f64, f64)> {
    let h = two_site_dense(u, v);
    let (w, q) = eigh(&h);
    let g = q.column(0).into_owned();
    let xg = kron_label("XIII") * &g;
    let mut poles: Vec<(f64, f64)> = Vec::new();
    for k in 0..w.len() {
        let amp = q.column(k).dotc(&xg).norm_sqr();
        if amp < 1e-12 {
            continue;
        }
        let om = w[k] - w[0];
        match poles.iter_mut().find(|p| (p.0 - om).abs() < 1e-8) {
            Some(p) => p.1 += amp / 2.0,
            None => poles.push((om, amp / 2.0)),
        }
    }
    poles.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    poles
}

pub fn lehmann_value(poles: &[(f64, f64)], t: f64) -> f64 {
    poles.iter().map(|(w, a)| 2.0 * a * (w * t).cos()).sum()
}

/// Frobenius distance up to a global phase.
pub fn phase_free_dist(a: &CMat, b: &CMat) -> f64 {
    let ov = (b.adjoint() * a).trace();
    let ph = if ov.norm() > 0.0 { ov / ov.norm() } else { c(1.0) };
    (a - b * ph).norm()
}
