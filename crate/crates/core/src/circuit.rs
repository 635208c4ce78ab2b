//! Gate-level circuits: the ground-state ansatz, Pauli exponentials, the
//! Hadamard-test Green's-function circuit, routing and peephole passes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::cartan::CartanSolution;
use crate::pauli::PauliTerm;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    H(usize),
    S(usize),
    Sdg(usize),
    X(usize),
    /// `e^{-iθX/2}`.
    Rx(usize, f64),
    /// `e^{-iθZ/2}`.
    Rz(usize, f64),
    Cnot(usize, usize),
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::S(q) | Gate::Sdg(q) | Gate::X(q) | Gate::Rx(q, _) | Gate::Rz(q, _) => vec![q],
            Gate::Cnot(c, t) => vec![c, t],
        }
    }

    fn max_qubit(&self) -> usize {
        self.qubits().into_iter().max().unwrap_or(0)
    }

    fn shifted(&self, off: usize) -> Gate {
        match *self {
            Gate::H(q) => Gate::H(q + off),
            Gate::S(q) => Gate::S(q + off),
            Gate::Sdg(q) => Gate::Sdg(q + off),
            Gate::X(q) => Gate::X(q + off),
            Gate::Rx(q, a) => Gate::Rx(q + off, a),
            Gate::Rz(q, a) => Gate::Rz(q + off, a),
            Gate::Cnot(c, t) => Gate::Cnot(c + off, t + off),
        }
    }

    pub fn is_cnot(&self) -> bool {
        matches!(self, Gate::Cnot(..))
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::H(q) => write!(f, "H {q}"),
            Gate::S(q) => write!(f, "S {q}"),
            Gate::Sdg(q) => write!(f, "SDG {q}"),
            Gate::X(q) => write!(f, "X {q}"),
            Gate::Rx(q, a) => write!(f, "RX {q} {a:.16e}"),
            Gate::Rz(q, a) => write!(f, "RZ {q} {a:.16e}"),
            Gate::Cnot(c, t) => write!(f, "CNOT {c} {t}"),
        }
    }
}

impl FromStr for Gate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let bad = || Error::Parse(format!("bad gate line '{s}'"));
        let q = |i: usize| parts.get(i).ok_or_else(bad)?.parse::<usize>().map_err(|_| bad());
        let a = |i: usize| {
            let v = parts.get(i).ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?;
            if v.is_finite() { Ok(v) } else { Err(bad()) }
        };
        let (g, arity) = match parts.first().copied() {
            Some("H") => (Gate::H(q(1)?), 2),
            Some("S") => (Gate::S(q(1)?), 2),
            Some("SDG") => (Gate::Sdg(q(1)?), 2),
            Some("X") => (Gate::X(q(1)?), 2),
            Some("RX") => (Gate::Rx(q(1)?, a(2)?), 3),
            Some("RZ") => (Gate::Rz(q(1)?, a(2)?), 3),
            Some("CNOT") => (Gate::Cnot(q(1)?, q(2)?), 3),
            _ => return Err(bad()),
        };
        if parts.len() != arity {
            return Err(bad());
        }
        Ok(g)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub width: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(width: usize) -> Self {
        Circuit { width, gates: Vec::new() }
    }

    pub fn push(&mut self, g: Gate) -> Result<()> {
        if g.max_qubit() >= self.width {
            return Err(Error::QubitIndex(g.max_qubit()));
        }
        if let Gate::Cnot(c, t) = g {
            if c == t {
                return Err(Error::InvalidParameters("CNOT control equals target".into()));
            }
        }
        if let Gate::Rx(_, a) | Gate::Rz(_, a) = g {
            if !a.is_finite() {
                return Err(Error::InvalidParameters("non-finite rotation angle".into()));
            }
        }
        self.gates.push(g);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<()> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_cnot()).count()
    }

    /// One gate per line, `GATE q0 [q1] [theta]`, after a `WIDTH n` header.
    pub fn to_text(&self) -> String {
        let mut s = format!("WIDTH {}\n", self.width);
        for g in &self.gates {
            s.push_str(&g.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let head = lines.next().ok_or_else(|| Error::Parse("empty circuit".into()))?;
        let width = head
            .strip_prefix("WIDTH ")
            .and_then(|w| w.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("bad header '{head}'")))?;
        let mut c = Circuit::new(width);
        for l in lines {
            c.push(l.parse()?)?;
        }
        Ok(c)
    }
}

/// Qubit connectivity of the compile target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    AllToAll,
    Linear,
}

/// Prepares `cos(θ/2+π/4)/√2 (|1010⟩+|0101⟩) + sin(θ/2+π/4)/√2 (|1001⟩+|0110⟩)`
/// with one Rx(θ) and three nearest-neighbour CNOTs.
pub fn ground_state_ansatz(theta: f64) -> Circuit {
    let gates = vec![
        Gate::H(0),
        Gate::H(2),
        Gate::Sdg(2),
        Gate::Rx(2, theta),
        Gate::S(2),
        Gate::Cnot(0, 1),
        Gate::Cnot(1, 2),
        Gate::Cnot(2, 3),
        Gate::X(1),
        Gate::X(3),
    ];
    Circuit { width: 4, gates }
}

/// Ansatz energy `E(θ) = -(U/4) sin θ + 2V cos θ`.
pub fn ansatz_energy(u: f64, v: f64, theta: f64) -> f64 {
    -(u / 4.0) * theta.sin() + 2.0 * v * theta.cos()
}

/// 1-D minimization of the ansatz energy over `[-π, π)`: a 720-point scan
/// followed by golden-section refinement.
pub fn optimize_ansatz_angle(u: f64, v: f64) -> Result<f64> {
    if v == 0.0 || !v.is_finite() || !u.is_finite() {
        return Err(Error::InvalidParameters("ansatz optimization needs finite U and V != 0".into()));
    }
    let e = |t: f64| ansatz_energy(u, v, t);
    let n = 720;
    let step = 2.0 * PI / n as f64;
    let best = (0..n).map(|i| -PI + i as f64 * step).min_by(|a, b| e(*a).total_cmp(&e(*b))).unwrap();
    let (mut a, mut b) = (best - step, best + step);
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    while (b - a).abs() > 1e-13 {
        if e(c) < e(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - gr * (b - a);
        d = a + gr * (b - a);
    }
    let t = 0.5 * (a + b);
    Ok((t + PI).rem_euclid(2.0 * PI) - PI)
}

/// `e^{-iθ·c·P}` for a Hermitian term `c·P` (all-to-all ladder). The
/// identity string compiles to an empty fragment.
pub fn compile_pauli_exponential(p: &PauliTerm, theta: f64) -> Result<Vec<Gate>> {
    compile_pauli_exponential_on(p, theta, Connectivity::AllToAll)
}

/// Parity ladder onto the last support qubit. On a linear chain the ladder
/// walks every qubit between the ends; each interior identity qubit `j` is
/// first folded into `j + 1` so the walk cancels its own contribution.
fn parity_ladder(p: &PauliTerm, conn: Connectivity) -> Vec<Gate> {
    let sup = p.support();
    match conn {
        Connectivity::AllToAll => sup.windows(2).map(|w| Gate::Cnot(w[0], w[1])).collect(),
        Connectivity::Linear => {
            let (lo, hi) = (sup[0], *sup.last().unwrap());
            let mut out: Vec<Gate> = (lo + 1..hi).rev().filter(|j| !sup.contains(j)).map(|j| Gate::Cnot(j, j + 1)).collect();
            out.extend((lo..hi).map(|j| Gate::Cnot(j, j + 1)));
            out
        }
    }
}

/// [`compile_pauli_exponential`] for a chosen connectivity.
pub fn compile_pauli_exponential_on(p: &PauliTerm, theta: f64, conn: Connectivity) -> Result<Vec<Gate>> {
    let c = p.real_coeff().ok_or_else(|| Error::NonHermitian(p.to_string()))?;
    if p.is_identity() {
        return Ok(Vec::new());
    }
    let sup = p.support();
    let mut pre = Vec::new();
    let mut post = Vec::new();
    for &q in &sup {
        match p.op_at(q) {
            'X' => {
                pre.push(Gate::H(q));
                post.push(Gate::H(q));
            }
            'Y' => {
                pre.extend([Gate::Sdg(q), Gate::H(q)]);
                post.extend([Gate::H(q), Gate::S(q)]);
            }
            _ => {}
        }
    }
    let ladder = parity_ladder(p, conn);
    let mut out = pre;
    out.extend(ladder.iter().copied());
    out.push(Gate::Rz(*sup.last().unwrap(), 2.0 * theta * c));
    out.extend(ladder.iter().rev().copied());
    out.extend(post);
    Ok(out)
}

/// Nearest-neighbour CNOT chain equivalent to `CNOT(c, t)`.
fn long_cnot(c: usize, t: usize, out: &mut Vec<Gate>) {
    if c.abs_diff(t) <= 1 {
        out.push(Gate::Cnot(c, t));
        return;
    }
    let m = if t > c { c + 1 } else { c - 1 };
    out.push(Gate::Cnot(c, m));
    long_cnot(m, t, out);
    out.push(Gate::Cnot(c, m));
    long_cnot(m, t, out);
}

/// Rewrites every non-adjacent CNOT as a nearest-neighbour chain.
pub fn route_linear(c: &Circuit) -> Circuit {
    let mut gates = Vec::with_capacity(c.gates.len());
    for g in &c.gates {
        match *g {
            Gate::Cnot(a, b) => long_cnot(a, b, &mut gates),
            other => gates.push(other),
        }
    }
    Circuit { width: c.width, gates }
}

/// Wire of the ancilla in the Green's-function circuit.
pub const ANCILLA: usize = 0;
/// Offset of system qubit 0 in the Green's-function circuit.
pub const SYSTEM_OFFSET: usize = 1;

fn shifted(gates: &[Gate], off: usize) -> impl Iterator<Item = Gate> + '_ {
    gates.iter().map(move |g| g.shifted(off))
}

/// Hadamard test for `Re⟨U†(t) X_0 U(t) X_0⟩` read out as `⟨Z⟩` of the
/// ancilla (wire 0); system qubit `q` sits on wire `q + 1`.
///
/// `e^{-ik_0}` commutes with `X_0` and is folded into the preparation, so
/// only `e^{ik_1} e^{-ith} e^{-ik_1}` sits between the controlled-X gates.
pub fn greens_function_circuit(sol: &CartanSolution, t: f64, theta_gs: f64, conn: Connectivity) -> Result<Circuit> {
    if sol.n != 4 {
        return Err(Error::QubitMismatch(4, sol.n));
    }
    let x0 = PauliTerm::new(sol.n, 1, 0);
    let mut c = Circuit::new(sol.n + 1);
    c.push(Gate::H(ANCILLA))?;
    c.extend(shifted(&ground_state_ansatz(theta_gs).gates, SYSTEM_OFFSET))?;
    let (k0, k1): (Vec<_>, Vec<_>) = sol.k_basis.iter().zip(&sol.kappa).partition(|(p, _)| p.commutes_with(&x0));
    for (p, &a) in &k0 {
        c.extend(shifted(&compile_pauli_exponential_on(p, a, conn)?, SYSTEM_OFFSET))?;
    }
    c.push(Gate::Cnot(ANCILLA, SYSTEM_OFFSET))?;
    for (p, &a) in &k1 {
        c.extend(shifted(&compile_pauli_exponential_on(p, a, conn)?, SYSTEM_OFFSET))?;
    }
    for (p, &e) in sol.h_basis.iter().zip(&sol.eta) {
        c.extend(shifted(&compile_pauli_exponential_on(p, e * t, conn)?, SYSTEM_OFFSET))?;
    }
    for (p, &a) in k1.iter().rev() {
        c.extend(shifted(&compile_pauli_exponential_on(p, -a, conn)?, SYSTEM_OFFSET))?;
    }
    c.push(Gate::Cnot(ANCILLA, SYSTEM_OFFSET))?;
    c.push(Gate::H(ANCILLA))?;
    Ok(c)
}

fn overlaps(a: &Gate, b: &Gate) -> bool {
    let qa = a.qubits();
    b.qubits().iter().any(|q| qa.contains(q))
}

/// True when the two gates commute by a simple structural rule.
fn gates_commute(a: &Gate, b: &Gate) -> bool {
    if !overlaps(a, b) {
        return true;
    }
    use Gate::*;
    let z_like = |g: &Gate| matches!(g, Rz(..) | S(_) | Sdg(_));
    let x_like = |g: &Gate| matches!(g, Rx(..) | X(_));
    match (*a, *b) {
        (Cnot(c1, t1), Cnot(c2, t2)) => c1 != t2 && c2 != t1,
        (Cnot(c, t), g) | (g, Cnot(c, t)) => {
            let q = g.qubits()[0];
            (q == c && z_like(&g)) || (q == t && x_like(&g))
        }
        (g, h) => (z_like(&g) && z_like(&h)) || (x_like(&g) && x_like(&h)),
    }
}

enum Fuse {
    Cancel,
    Replace(Gate),
}

fn fuse(a: &Gate, b: &Gate) -> Option<Fuse> {
    use Gate::*;
    match (*a, *b) {
        (Cnot(c1, t1), Cnot(c2, t2)) if c1 == c2 && t1 == t2 => Some(Fuse::Cancel),
        (H(p), H(q)) | (X(p), X(q)) if p == q => Some(Fuse::Cancel),
        (S(p), Sdg(q)) | (Sdg(p), S(q)) if p == q => Some(Fuse::Cancel),
        (Rz(p, x), Rz(q, y)) if p == q => Some(Fuse::Replace(Rz(p, x + y))),
        (Rx(p, x), Rx(q, y)) if p == q => Some(Fuse::Replace(Rx(p, x + y))),
        _ => None,
    }
}

fn is_trivial_rotation(g: &Gate) -> bool {
    match *g {
        // Rz(2πk) and Rx(2πk) are ±I, a global phase.
        Gate::Rz(_, a) | Gate::Rx(_, a) => {
            let r = a.rem_euclid(2.0 * PI);
            r < 1e-14 || 2.0 * PI - r < 1e-14
        }
        _ => false,
    }
}

/// Peephole optimization: identity-rotation removal, cancellation of
/// self-inverse pairs and merging of same-axis rotations, looking past
/// gates that structurally commute. Never increases the CNOT count.
pub fn optimize_circuit(c: &Circuit) -> Circuit {
    let mut gates: Vec<Option<Gate>> = c.gates.iter().copied().map(Some).collect();
    loop {
        let mut changed = false;
        for i in 0..gates.len() {
            let Some(gi) = gates[i] else { continue };
            if is_trivial_rotation(&gi) {
                gates[i] = None;
                changed = true;
                continue;
            }
            for j in i + 1..gates.len() {
                let Some(gj) = gates[j] else { continue };
                if !overlaps(&gi, &gj) {
                    continue;
                }
                if let Some(f) = fuse(&gi, &gj) {
                    gates[i] = None;
                    gates[j] = match f {
                        Fuse::Cancel => None,
                        Fuse::Replace(g) => Some(g),
                    };
                    changed = true;
                    break;
                }
                if !gates_commute(&gi, &gj) {
                    break;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Circuit { width: c.width, gates: gates.into_iter().flatten().collect() }
}
