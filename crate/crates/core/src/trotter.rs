//! Second-order Trotter comparator: circuits, the algorithmic error fit
//! and the total-fidelity model.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::cartan::pauli_exp_matrix;
use crate::circuit::{ground_state_ansatz, optimize_ansatz_angle, Circuit, Gate};
use crate::pauli::{two_site_hamiltonian, PauliSum, PauliTerm};
use crate::{Error, Result};

/// Reference per-CNOT fidelity.
pub const DEFAULT_F_CNOT: f64 = 0.9921;
/// CNOT count of the reference fast-forwarded circuit.
pub const CARTAN_REFERENCE_CNOTS: u32 = 77;
/// Lower edge of the Cartan reference band (measured-fidelity bound).
pub const CARTAN_BAND_LOW: f64 = 0.18;
pub const T_TARGET: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// Body only, any qubit pair may interact.
    AllToAll,
    /// Ground-state preparation, a SWAP of qubits 0 and 1 so `Z₀Z₂` is
    /// nearest-neighbour, the body, and the inverse SWAP.
    Linear,
}

/// CNOTs of an `r`-step circuit.
pub fn cnot_cost(r: usize, layout: Layout) -> usize {
    match layout {
        Layout::AllToAll => 6 * r + 2,
        Layout::Linear => 6 * r + 11,
    }
}

/// `e^{-iφ(XX+YY)/2}` on `(a, b)` with two CNOTs.
fn hop(a: usize, b: usize, phi: f64, out: &mut Vec<Gate>) {
    let q = std::f64::consts::FRAC_PI_2;
    out.extend([
        Gate::Rx(a, q),
        Gate::Rx(b, q),
        Gate::Cnot(a, b),
        Gate::Rx(a, phi),
        Gate::Rz(b, phi),
        Gate::Cnot(a, b),
        Gate::Rx(a, -q),
        Gate::Rx(b, -q),
    ]);
}

/// `e^{-iθZ_aZ_b}`.
fn zz(a: usize, b: usize, theta: f64, out: &mut Vec<Gate>) {
    out.extend([Gate::Cnot(a, b), Gate::Rz(b, 2.0 * theta), Gate::Cnot(a, b)]);
}

/// Gates of `e^{-i(τ/2)H₀}(e^{-iτH₁}e^{-iτH₀})^{r-1}e^{-iτH₁}e^{-i(τ/2)H₀}`
/// with `H₀ = (U/4)Z₀Z₂` and `H₁` the hopping terms; `map` sends logical
/// to physical qubits.
fn body(u: f64, v: f64, t: f64, r: usize, map: [usize; 4]) -> Vec<Gate> {
    let tau = t / r as f64;
    let mut g = Vec::with_capacity(16 * r + 6);
    let h0 = |th: f64, g: &mut Vec<Gate>| zz(map[0], map[2], u / 4.0 * th, g);
    h0(tau / 2.0, &mut g);
    for step in 0..r {
        // (V/2)(XX+YY) for time τ is a hop with φ = Vτ.
        hop(map[0], map[1], v * tau, &mut g);
        hop(map[2], map[3], v * tau, &mut g);
        h0(if step + 1 == r { tau / 2.0 } else { tau }, &mut g);
    }
    g
}

fn swap(a: usize, b: usize) -> [Gate; 3] {
    [Gate::Cnot(a, b), Gate::Cnot(b, a), Gate::Cnot(a, b)]
}

pub fn trotter2_circuit(u: f64, v: f64, t: f64, r: usize, layout: Layout) -> Result<Circuit> {
    if r < 1 {
        return Err(Error::InvalidParameters("r must be at least 1".into()));
    }
    let mut c = Circuit::new(4);
    match layout {
        Layout::AllToAll => c.extend(body(u, v, t, r, [0, 1, 2, 3]))?,
        Layout::Linear => {
            c.extend(ground_state_ansatz(optimize_ansatz_angle(u, v)?).gates)?;
            c.extend(swap(0, 1))?;
            c.extend(body(u, v, t, r, [1, 0, 2, 3]))?;
            c.extend(swap(0, 1))?;
        }
    }
    Ok(c)
}

/// Dense `e^{-itH}` of a Hermitian Pauli sum.
pub fn exact_evolution(h: &PauliSum, t: f64) -> DMatrix<Complex64> {
    let e = h.to_matrix().symmetric_eigen();
    let d = DVector::from_iterator(e.eigenvalues.len(), e.eigenvalues.iter().map(|&w| Complex64::from_polar(1.0, -w * t)));
    &e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.adjoint()
}

/// Dense second-order product `(A B A)^r`, `A = e^{-i(τ/2)H₀}`, `B = e^{-iτH₁}`.
pub fn trotter_unitary(u: f64, v: f64, t: f64, r: usize) -> DMatrix<Complex64> {
    let tau = t / r as f64;
    let zz = PauliTerm::from_label("ZIZI").expect("label");
    let a = pauli_exp_matrix(&zz, u / 4.0 * tau / 2.0);
    let mut b = DMatrix::<Complex64>::identity(16, 16);
    for l in ["XXII", "YYII", "IIXX", "IIYY"] {
        b *= pauli_exp_matrix(&PauliTerm::from_label(l).expect("label"), v / 2.0 * tau);
    }
    let step = &a * b * &a;
    let mut out = DMatrix::<Complex64>::identity(16, 16);
    for _ in 0..r {
        out = &step * out;
    }
    out
}

/// Frobenius-norm convention of the error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormConvention {
    Unnormalized,
    /// Divided by `√dim`.
    Normalized,
}

pub fn trotter_error_with(u: f64, v: f64, t: f64, r: usize, norm: NormConvention) -> Result<f64> {
    if r < 1 {
        return Err(Error::InvalidParameters("r must be at least 1".into()));
    }
    let e = (exact_evolution(&two_site_hamiltonian(u, v)?, t) - trotter_unitary(u, v, t, r)).norm();
    Ok(match norm {
        NormConvention::Unnormalized => e,
        NormConvention::Normalized => e / 4.0,
    })
}

/// `‖e^{-itĤ} − U_Trotter(t, r)‖_F`.
pub fn trotter_error(u: f64, v: f64, t: f64, r: usize) -> Result<f64> {
    trotter_error_with(u, v, t, r, NormConvention::Unnormalized)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub t_grid: Vec<f64>,
    pub r_grid: Vec<usize>,
    /// Points with a larger error are outside the asymptotic regime.
    pub max_error: f64,
    /// Points with a larger step `τ = t/r` are dropped.
    pub max_tau: f64,
    pub norm: NormConvention,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            t_grid: (1..=8).map(f64::from).collect(),
            r_grid: (4..=64).collect(),
            max_error: 0.5,
            max_tau: 0.5,
            norm: NormConvention::Unnormalized,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub coefficient: f64,
    pub points: usize,
}

/// Least-squares `c` in `error ≈ c·t³/r²` over the filtered grid.
pub fn fit_coefficient(u: f64, v: f64, opts: &FitOptions) -> Result<FitResult> {
    let pts: Vec<(f64, usize)> = opts.t_grid.iter().flat_map(|&t| opts.r_grid.iter().map(move |&r| (t, r))).filter(|&(t, r)| r >= 1 && t / r as f64 <= opts.max_tau).collect();
    let xy: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|&(t, r)| Ok((t.powi(3) / (r * r) as f64, trotter_error_with(u, v, t, r, opts.norm)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|&(_, e)| e <= opts.max_error)
        .collect();
    let sxx: f64 = xy.iter().map(|p| p.0 * p.0).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameters("fit grid left no points".into()));
    }
    let sxy: f64 = xy.iter().map(|p| p.0 * p.1).sum();
    Ok(FitResult { coefficient: sxy / sxx, points: xy.len() })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FidelityModel {
    pub f_cnot: f64,
    pub cnot_count: u32,
    pub f_alg: f64,
    pub f_total: f64,
}

impl FidelityModel {
    pub fn new(f_cnot: f64, cnot_count: u32, f_alg: f64) -> Self {
        FidelityModel { f_cnot, cnot_count, f_alg, f_total: f_alg * f_cnot.powi(cnot_count as i32) }
    }

    pub fn f_runtime(&self) -> f64 {
        self.f_cnot.powi(self.cnot_count as i32)
    }
}

/// `max(0, 1 − c·t³/r²)`.
pub fn f_trotter(coeff: f64, t: f64, r: f64) -> f64 {
    (1.0 - coeff * t.powi(3) / (r * r)).max(0.0)
}

/// Total fidelity on the linear layout at real-valued `r`.
pub fn f_total(coeff: f64, t: f64, r: f64, f_cnot: f64) -> f64 {
    f_trotter(coeff, t, r) * f_cnot.powf(6.0 * r + 11.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LandscapeRow {
    pub t: f64,
    pub r: usize,
    pub f_trotter: f64,
    pub f_runtime: f64,
    pub f_total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub f_max: f64,
    /// Real-valued maximizer.
    pub r_opt: f64,
    /// Best integer step count.
    pub r_int: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Landscape {
    pub coefficient: f64,
    pub f_cnot: f64,
    pub rows: Vec<LandscapeRow>,
    pub curve: Vec<CurvePoint>,
    /// `(lower, upper)` Cartan reference band.
    pub cartan_band: (f64, f64),
}

/// Maximizes [`f_total`] over real `r ∈ [1, r_max]`: a log-spaced scan,
/// then golden-section refinement around the best sample.
pub fn max_over_r(coeff: f64, t: f64, f_cnot: f64, r_max: f64) -> CurvePoint {
    let f = |r: f64| f_total(coeff, t, r, f_cnot);
    let n = 2000;
    let ln_max = r_max.max(1.0).ln();
    let grid: Vec<f64> = (0..=n).map(|k| (ln_max * k as f64 / n as f64).exp()).collect();
    let k = (0..=n).max_by(|&a, &b| f(grid[a]).total_cmp(&f(grid[b]))).unwrap();
    let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(n)]);
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - gr * (b - a);
        let d = a + gr * (b - a);
        if f(c) >= f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let r_opt = 0.5 * (a + b);
    let lo = r_opt.floor().max(1.0) as usize;
    let r_int = if f((lo + 1) as f64) > f(lo as f64) && ((lo + 1) as f64) <= r_max.max(1.0) { lo + 1 } else { lo };
    CurvePoint { t, f_max: f(r_opt), r_opt, r_int }
}

pub fn fidelity_landscape(coeff: f64, t_grid: &[f64], r_grid: &[usize], f_cnot: f64) -> Result<Landscape> {
    if t_grid.is_empty() || r_grid.is_empty() {
        return Err(Error::InvalidParameters("landscape grids must be nonempty".into()));
    }
    let rows = t_grid
        .iter()
        .flat_map(|&t| {
            r_grid.iter().map(move |&r| {
                let ft = f_trotter(coeff, t, r as f64);
                let fr = f_cnot.powi(cnot_cost(r, Layout::Linear) as i32);
                LandscapeRow { t, r, f_trotter: ft, f_runtime: fr, f_total: ft * fr }
            })
        })
        .collect();
    let r_max = *r_grid.iter().max().unwrap() as f64;
    let curve = t_grid.par_iter().map(|&t| max_over_r(coeff, t, f_cnot, r_max)).collect();
    Ok(Landscape { coefficient: coeff, f_cnot, rows, curve, cartan_band: (CARTAN_BAND_LOW, f_cnot.powi(CARTAN_REFERENCE_CNOTS as i32)) })
}

impl Landscape {
    pub fn rows_csv(&self) -> String {
        let mut s = String::from("t,r,F_trotter,F_runtime,F_total\n");
        for r in &self.rows {
            let _ = writeln!(s, "{:.16e},{},{:.16e},{:.16e},{:.16e}", r.t, r.r, r.f_trotter, r.f_runtime, r.f_total);
        }
        s
    }

    pub fn curve_csv(&self) -> String {
        let mut s = String::from("t,F_max,r_opt\n");
        for p in &self.curve {
            let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", p.t, p.f_max, p.r_opt);
        }
        s
    }
}
