//! Numerical KHK factorization `e^{-itH} = K e^{-ith} K^†` with
//! `K = Π_j e^{iκ_j k_j}`.
//!
//! The coefficients κ come from a local extremum of
//! `f(κ) = <K v K^†, H>` with `v = Σ_j π^j h_j`; at such a point
//! `K^† H K` lies in the Cartan subalgebra and its components are η.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lie::CartanDecomposition;
use crate::pauli::{product_phase, strings_commute, trace_inner, PauliSum, PauliTerm};
use crate::{Error, Result};

/// `e^{iθp} s e^{-iθp}` for a single string `p` (its coefficient and phase
/// are ignored, only the string is used).
pub fn adjoint_rotate(theta: f64, p: &PauliTerm, s: &PauliSum) -> PauliSum {
    let (c, sn) = ((2.0 * theta).cos(), (2.0 * theta).sin());
    let mut out = PauliSum::new(s.n());
    for q in s.iter() {
        if strings_commute(p.x_bits, p.z_bits, q.x_bits, q.z_bits) {
            out.add(q.x_bits, q.z_bits, q.coeff);
            continue;
        }
        // i·p·q carries phase i^{k+1} with k odd, i.e. a real sign.
        let k = product_phase(p.x_bits, p.z_bits, q.x_bits, q.z_bits);
        let sign = if k == 1 { -1.0 } else { 1.0 };
        out.add(q.x_bits, q.z_bits, q.coeff * c);
        out.add(p.x_bits ^ q.x_bits, p.z_bits ^ q.z_bits, q.coeff * sn * sign);
    }
    out
}

/// `i[p, s]` for a single string `p`.
fn ad_i(p: &PauliTerm, s: &PauliSum) -> PauliSum {
    let mut out = PauliSum::new(s.n());
    for q in s.iter() {
        if strings_commute(p.x_bits, p.z_bits, q.x_bits, q.z_bits) {
            continue;
        }
        let k = product_phase(p.x_bits, p.z_bits, q.x_bits, q.z_bits);
        let sign = if k == 1 { -1.0 } else { 1.0 };
        out.add(p.x_bits ^ q.x_bits, p.z_bits ^ q.z_bits, 2.0 * q.coeff * sign);
    }
    out
}

/// `K^† s K` for `K = Π_j e^{iκ_j k_j}`.
pub fn conjugate_dagger(kappa: &[f64], k: &[PauliTerm], s: &PauliSum) -> PauliSum {
    kappa.iter().zip(k).fold(s.clone(), |acc, (&a, p)| adjoint_rotate(-a, p, &acc))
}

/// `K s K^†` for `K = Π_j e^{iκ_j k_j}`.
pub fn conjugate(kappa: &[f64], k: &[PauliTerm], s: &PauliSum) -> PauliSum {
    kappa.iter().zip(k).rev().fold(s.clone(), |acc, (&a, p)| adjoint_rotate(a, p, &acc))
}

/// `v = Σ_j γ^j h_j` with `γ = π`, rescaled so that the largest coefficient is 1.
pub fn v_element(h: &[PauliTerm]) -> PauliSum {
    let n = h.first().map(|e| e.n).unwrap_or(0);
    let top = h.len() as i32;
    let mut v = PauliSum::new(n);
    for (j, e) in h.iter().enumerate() {
        v.add(e.x_bits, e.z_bits, PI.powi(j as i32 + 1 - top));
    }
    v
}

/// `f(κ)`; errors when `kappa` and `k` differ in length.
pub fn objective(kappa: &[f64], k: &[PauliTerm], v: &PauliSum, ham: &PauliSum) -> Result<f64> {
    if kappa.len() != k.len() {
        return Err(Error::InvalidParameters(format!("{} coefficients for {} k-strings", kappa.len(), k.len())));
    }
    trace_inner(&conjugate(kappa, k, v), ham)
}

/// `f(κ)` and its analytic gradient.
pub fn objective_grad(kappa: &[f64], k: &[PauliTerm], v: &PauliSum, ham: &PauliSum) -> Result<(f64, Vec<f64>)> {
    if kappa.len() != k.len() {
        return Err(Error::InvalidParameters(format!("{} coefficients for {} k-strings", kappa.len(), k.len())));
    }
    let m = k.len();
    // right[j] = R_j … R_{m-1} v R^†…
    let mut right = vec![v.clone(); m + 1];
    for j in (0..m).rev() {
        right[j] = adjoint_rotate(kappa[j], &k[j], &right[j + 1]);
    }
    let f = trace_inner(&right[0], ham)?;
    let mut grad = vec![0.0; m];
    let mut left = ham.clone();
    for j in 0..m {
        grad[j] = trace_inner(&ad_i(&k[j], &right[j]), &left)?;
        left = adjoint_rotate(-kappa[j], &k[j], &left);
    }
    Ok((f, grad))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Residual tolerance relative to `‖H‖`.
    pub residual_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { grad_tol: 1e-10, max_iter: 10_000, residual_tol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CartanSolution {
    pub n: usize,
    pub k_basis: Vec<PauliTerm>,
    pub kappa: Vec<f64>,
    pub h_basis: Vec<PauliTerm>,
    pub eta: Vec<f64>,
    pub residual: f64,
    pub f_value: f64,
}

fn norm(g: &[f64]) -> f64 {
    g.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Minimizes `f` from a seeded random start with BFGS and a
/// backtracking line search, then extracts η.
pub fn solve(ham: &PauliSum, dec: &CartanDecomposition, seed: u64, opts: &SolveOptions) -> Result<CartanSolution> {
    solve_traced(ham, dec, seed, opts).map(|(s, _)| s)
}

/// Like [`solve`], also returning the objective value of every accepted iterate.
pub fn solve_traced(ham: &PauliSum, dec: &CartanDecomposition, seed: u64, opts: &SolveOptions) -> Result<(CartanSolution, Vec<f64>)> {
    let k = &dec.k.elements;
    let h = &dec.h.elements;
    let v = v_element(h);
    let m = k.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Vec<f64> = (0..m).map(|_| rng.random_range(-PI..PI)).collect();
    let (x, f, trace) = minimize(x0, k, &v, ham, opts)?;
    let rotated = conjugate_dagger(&x, k, ham);
    let eta: Vec<f64> = h.iter().map(|e| rotated.coeff(e.x_bits, e.z_bits)).collect();
    let residual = rotated
        .iter()
        .filter(|t| !h.iter().any(|e| e.x_bits == t.x_bits && e.z_bits == t.z_bits))
        .map(|t| t.coeff * t.coeff)
        .sum::<f64>()
        .sqrt();
    let tol = opts.residual_tol * ham.norm().max(f64::MIN_POSITIVE);
    if residual > tol {
        return Err(Error::Residual { residual, tol });
    }
    let sol = CartanSolution { n: ham.n(), k_basis: k.clone(), kappa: x, h_basis: h.clone(), eta, residual, f_value: f };
    Ok((sol, trace))
}

/// Slack for comparing objective values that differ only by rounding.
fn f_slack(f: f64) -> f64 {
    16.0 * f64::EPSILON * f.abs().max(1.0)
}

fn minimize(mut x: Vec<f64>, k: &[PauliTerm], v: &PauliSum, ham: &PauliSum, opts: &SolveOptions) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    let m = k.len();
    let (mut f, mut g) = objective_grad(&x, k, v, ham)?;
    let mut trace = vec![f];
    let mut hinv = DMatrix::<f64>::identity(m, m);
    let mut iter = 0;
    // BFGS until the line search can no longer resolve a decrease in f.
    while norm(&g) > opts.grad_tol && iter < opts.max_iter {
        iter += 1;
        let gv = DVector::from_column_slice(&g);
        let mut d = -(&hinv * &gv);
        if d.dot(&gv) >= 0.0 {
            hinv = DMatrix::identity(m, m);
            d = -gv.clone();
        }
        let slope = d.dot(&gv);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xn: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + step * b).collect();
            let (fn_, gn) = objective_grad(&xn, k, v, ham)?;
            if fn_ <= f + 1e-4 * step * slope && fn_ < f {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else { break };
        let s = DVector::from_iterator(m, xn.iter().zip(&x).map(|(a, b)| a - b));
        let y = DVector::from_iterator(m, gn.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(m, m);
            let a = &i - rho * &s * y.transpose();
            let b = &i - rho * &y * s.transpose();
            hinv = &a * &hinv * &b + rho * &s * s.transpose();
        }
        x = xn;
        f = fn_;
        g = gn;
        trace.push(f);
    }
    // Newton polish on the gradient once f differences drop below rounding.
    let mut polish = 0;
    while norm(&g) > opts.grad_tol && polish < 50 && iter < opts.max_iter {
        polish += 1;
        iter += 1;
        let hess = hessian(&x, k, v, ham)?;
        let eig = hess.symmetric_eigen();
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let gv = DVector::from_column_slice(&g);
        let mut d = DVector::zeros(m);
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if l.abs() > 1e-10 * lmax {
                let u = eig.eigenvectors.column(i);
                d -= u * (u.dot(&gv) / l.abs());
            }
        }
        let mut step = 1.0;
        let mut moved = false;
        for _ in 0..20 {
            let xn: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + step * b).collect();
            let (fn_, gn) = objective_grad(&xn, k, v, ham)?;
            if norm(&gn) < norm(&g) && fn_ <= f + f_slack(f) {
                x = xn;
                f = fn_;
                g = gn;
                trace.push(f);
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let gn = norm(&g);
    if gn > opts.grad_tol {
        return Err(Error::NotConverged { grad: gn, iterations: iter });
    }
    Ok((x, f, trace))
}

/// Symmetrized central-difference Hessian from analytic gradients.
fn hessian(x: &[f64], k: &[PauliTerm], v: &PauliSum, ham: &PauliSum) -> Result<DMatrix<f64>> {
    let m = x.len();
    let h = 1e-5;
    let mut out = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let (_, gp) = objective_grad(&xp, k, v, ham)?;
        let (_, gm) = objective_grad(&xm, k, v, ham)?;
        for i in 0..m {
            out[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    Ok((&out + out.transpose()) * 0.5)
}

/// Solves from seeds `seed, seed+1, …` until `count` solutions pass the
/// residual test, skipping failed starts (at most `4·count` attempts).
pub fn solve_many(ham: &PauliSum, dec: &CartanDecomposition, seed: u64, count: usize, opts: &SolveOptions) -> Result<Vec<CartanSolution>> {
    let mut out = Vec::with_capacity(count);
    let mut last_err = None;
    for s in 0..(4 * count.max(1)) as u64 {
        if out.len() == count {
            break;
        }
        match solve(ham, dec, seed.wrapping_add(s), opts) {
            Ok(sol) => out.push(sol),
            Err(e) => last_err = Some(e),
        }
    }
    if out.len() < count {
        return Err(last_err.unwrap_or(Error::NotConverged { grad: f64::NAN, iterations: 0 }));
    }
    Ok(out)
}

impl CartanSolution {
    /// `Σ_j η_j h_j`.
    pub fn h_sum(&self) -> PauliSum {
        let mut s = PauliSum::new(self.n);
        for (e, &c) in self.h_basis.iter().zip(&self.eta) {
            s.add(e.x_bits, e.z_bits, c);
        }
        s
    }

    /// Dense `K = Π_j e^{iκ_j k_j}`.
    pub fn k_matrix(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n;
        let mut kmat = DMatrix::<Complex64>::identity(dim, dim);
        for (p, &a) in self.k_basis.iter().zip(&self.kappa) {
            kmat *= pauli_exp_matrix(p, -a);
        }
        kmat
    }

    /// Dense `K e^{-ith} K^†`.
    pub fn evolution_matrix(&self, t: f64) -> DMatrix<Complex64> {
        let dim = 1usize << self.n;
        let mut e = DMatrix::<Complex64>::identity(dim, dim);
        for (p, &c) in self.h_basis.iter().zip(&self.eta) {
            e *= pauli_exp_matrix(p, c * t);
        }
        let k = self.k_matrix();
        &k * e * k.adjoint()
    }

    /// Structured text with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "qubits {}", self.n).unwrap();
        writeln!(s, "residual {:.16e}", self.residual).unwrap();
        writeln!(s, "f_value {:.16e}", self.f_value).unwrap();
        for (p, c) in self.k_basis.iter().zip(&self.kappa) {
            writeln!(s, "kappa {} {:.16e}", p.label(), c).unwrap();
        }
        for (p, c) in self.h_basis.iter().zip(&self.eta) {
            writeln!(s, "eta {} {:.16e}", p.label(), c).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |l: &str| Error::Parse(format!("bad solution line '{l}'"));
        let num = |v: &str, l: &str| v.parse::<f64>().map_err(|_| bad(l));
        let mut sol = CartanSolution { n: 0, k_basis: vec![], kappa: vec![], h_basis: vec![], eta: vec![], residual: 0.0, f_value: 0.0 };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["qubits", n] => sol.n = n.parse().map_err(|_| bad(line))?,
                ["residual", v] => sol.residual = num(v, line)?,
                ["f_value", v] => sol.f_value = num(v, line)?,
                ["kappa", p, v] => {
                    sol.k_basis.push(PauliTerm::from_label(p)?);
                    sol.kappa.push(num(v, line)?);
                }
                ["eta", p, v] => {
                    sol.h_basis.push(PauliTerm::from_label(p)?);
                    sol.eta.push(num(v, line)?);
                }
                _ => return Err(bad(line)),
            }
        }
        if sol.k_basis.iter().chain(&sol.h_basis).any(|p| p.n != sol.n) {
            return Err(Error::Parse("string length disagrees with qubit count".into()));
        }
        Ok(sol)
    }
}

/// Dense `e^{-iθP}` for a unit string `P` (`P² = I`).
pub fn pauli_exp_matrix(p: &PauliTerm, theta: f64) -> DMatrix<Complex64> {
    let dim = 1usize << p.n;
    let id = DMatrix::<Complex64>::identity(dim, dim);
    id * Complex64::new(theta.cos(), 0.0) + p.unit().to_matrix() * Complex64::new(0.0, -theta.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::two_site_hamiltonian;

    #[test]
    fn zero_angle_is_identity() {
        let s: PauliSum = "1.0*XI + 0.5*ZZ".parse().unwrap();
        let p = PauliTerm::from_label("ZI").unwrap();
        assert_eq!(adjoint_rotate(0.0, &p, &s), s);
    }

    #[test]
    fn quarter_turn_matches_dense() {
        let s: PauliSum = "1.0*X".parse().unwrap();
        let p = PauliTerm::from_label("Z").unwrap();
        let r = adjoint_rotate(PI / 4.0, &p, &s);
        let u = pauli_exp_matrix(&p, -PI / 4.0);
        let dense = &u * s.to_matrix() * u.adjoint();
        assert!((dense - r.to_matrix()).norm() < 1e-14);
        assert!((r.coeff(1, 1) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn half_turn_flips_sign() {
        let s: PauliSum = "1.0*XZ".parse().unwrap();
        let p = PauliTerm::from_label("ZI").unwrap();
        let mut r = adjoint_rotate(PI / 2.0, &p, &s);
        r.prune(1e-15);
        assert!((r.coeff(1, 2) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn objective_at_zero_is_plain_overlap() {
        let ham = two_site_hamiltonian(4.0, 1.0).unwrap();
        let dec = CartanDecomposition::from_hamiltonian(&ham).unwrap();
        let v = v_element(&dec.h.elements);
        let zero = vec![0.0; dec.k.len()];
        let f = objective(&zero, &dec.k.elements, &v, &ham).unwrap();
        assert!((f - trace_inner(&v, &ham).unwrap()).abs() < 1e-15);
        assert!(objective(&zero[1..], &dec.k.elements, &v, &ham).is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let ham = two_site_hamiltonian(2.0, 0.944).unwrap();
        let dec = CartanDecomposition::from_hamiltonian(&ham).unwrap();
        let sol = solve(&ham, &dec, 7, &SolveOptions::default()).unwrap();
        let back = CartanSolution::from_text(&sol.to_text()).unwrap();
        assert_eq!(back, sol);
    }
}
