//! Statevector and density-matrix simulation, CNOT depolarizing noise,
//! shot sampling, readout mitigation and sector post-selection.
//!
//! Basis indices put qubit 0 in the most significant bit, as the dense
//! Pauli matrices do.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::circuit::{Circuit, Gate, SYSTEM_OFFSET};
use crate::{Error, Result};

const C0: Complex64 = Complex64::new(0.0, 0.0);
const C1: Complex64 = Complex64::new(1.0, 0.0);

/// Mean of the two-qubit error rates of the reference device.
pub const DEFAULT_CNOT_DEPOLARIZING: f64 = 0.0079;

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    pub cnot_depolarizing: f64,
    /// Per-qubit `(p(1|0), p(0|1))`; missing qubits read out perfectly.
    pub readout_flip: Vec<(f64, f64)>,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { cnot_depolarizing: DEFAULT_CNOT_DEPOLARIZING, readout_flip: Vec::new() }
    }
}

impl NoiseModel {
    pub fn depolarizing(eps: f64) -> Self {
        NoiseModel { cnot_depolarizing: eps, readout_flip: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.cnot_depolarizing) || !self.readout_flip.iter().all(|&(a, b)| ok(a) && ok(b)) {
            return Err(Error::InvalidParameters("noise probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn flip(&self, q: usize) -> (f64, f64) {
        self.readout_flip.get(q).copied().unwrap_or((0.0, 0.0))
    }

    pub fn has_readout_error(&self) -> bool {
        self.readout_flip.iter().any(|&(a, b)| a != 0.0 || b != 0.0)
    }
}

/// Width limits of the two simulation modes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WidthCaps {
    pub statevector: usize,
    pub density: usize,
}

impl Default for WidthCaps {
    fn default() -> Self {
        WidthCaps { statevector: 12, density: 6 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum QuantumState {
    Statevector { n: usize, amps: Vec<Complex64> },
    /// Row-major `2^n × 2^n` matrix.
    Density { n: usize, rho: Vec<Complex64> },
}

fn gate_matrix(g: &Gate) -> [Complex64; 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i = Complex64::i();
    match *g {
        Gate::H(_) => [C1 * s, C1 * s, C1 * s, -C1 * s],
        Gate::S(_) => [C1, C0, C0, i],
        Gate::Sdg(_) => [C1, C0, C0, -i],
        Gate::X(_) => [C0, C1, C1, C0],
        Gate::Rx(_, a) => {
            let (c, sn) = ((a / 2.0).cos(), (a / 2.0).sin());
            [C1 * c, -i * sn, -i * sn, C1 * c]
        }
        Gate::Rz(_, a) => [Complex64::from_polar(1.0, -a / 2.0), C0, C0, Complex64::from_polar(1.0, a / 2.0)],
        Gate::Cnot(..) => unreachable!("two-qubit gate"),
    }
}

/// Applies a 2×2 matrix to qubit `q` of an `n`-qubit vector.
fn apply_1q(v: &mut [Complex64], n: usize, q: usize, m: &[Complex64; 4]) {
    let bit = 1usize << (n - 1 - q);
    for i in 0..v.len() {
        if i & bit == 0 {
            let (a, b) = (v[i], v[i | bit]);
            v[i] = m[0] * a + m[1] * b;
            v[i | bit] = m[2] * a + m[3] * b;
        }
    }
}

fn apply_cnot(v: &mut [Complex64], n: usize, c: usize, t: usize) {
    let (cb, tb) = (1usize << (n - 1 - c), 1usize << (n - 1 - t));
    for i in 0..v.len() {
        if i & cb != 0 && i & tb == 0 {
            v.swap(i, i | tb);
        }
    }
}

fn apply_gate(v: &mut [Complex64], n: usize, g: &Gate) {
    match *g {
        Gate::Cnot(c, t) => apply_cnot(v, n, c, t),
        _ => apply_1q(v, n, g.qubits()[0], &gate_matrix(g)),
    }
}

/// Two-qubit depolarizing channel `ρ → (1-ε)ρ + ε I/4 ⊗ Tr_ab ρ`.
fn depolarize(rho: &mut [Complex64], n: usize, a: usize, b: usize, eps: f64) {
    if eps == 0.0 {
        return;
    }
    let dim = 1usize << n;
    let (ab, bb) = (1usize << (n - 1 - a), 1usize << (n - 1 - b));
    let mask = ab | bb;
    let subs = [0, bb, ab, ab | bb];
    let old = rho.to_vec();
    for r in 0..dim {
        for c in 0..dim {
            let mut v = old[r * dim + c] * (1.0 - eps);
            if r & mask == c & mask {
                let (r0, c0) = (r & !mask, c & !mask);
                let tr: Complex64 = subs.iter().map(|&s| old[(r0 | s) * dim + (c0 | s)]).sum();
                v += tr * (eps / 4.0);
            }
            rho[r * dim + c] = v;
        }
    }
}

/// Exact propagation with default width caps.
pub fn run(c: &Circuit, noise: Option<&NoiseModel>) -> Result<QuantumState> {
    run_capped(c, noise, WidthCaps::default())
}

/// Statevector without noise, density matrix with noise.
pub fn run_capped(c: &Circuit, noise: Option<&NoiseModel>, caps: WidthCaps) -> Result<QuantumState> {
    let n = c.width;
    match noise {
        None => {
            if n > caps.statevector {
                return Err(Error::WidthCap { width: n, cap: caps.statevector, mode: "statevector" });
            }
            let mut amps = vec![C0; 1 << n];
            amps[0] = C1;
            for g in &c.gates {
                apply_gate(&mut amps, n, g);
            }
            Ok(QuantumState::Statevector { n, amps })
        }
        Some(noise) => {
            noise.validate()?;
            if n > caps.density {
                return Err(Error::WidthCap { width: n, cap: caps.density, mode: "density" });
            }
            // ρ as a 2n-qubit vector: row qubits first, column qubits second.
            let mut rho = vec![C0; 1 << (2 * n)];
            rho[0] = C1;
            for g in &c.gates {
                match *g {
                    Gate::Cnot(a, b) => {
                        apply_cnot(&mut rho, 2 * n, a, b);
                        apply_cnot(&mut rho, 2 * n, a + n, b + n);
                        depolarize(&mut rho, n, a, b, noise.cnot_depolarizing);
                    }
                    _ => {
                        let m = gate_matrix(g);
                        let q = g.qubits()[0];
                        apply_1q(&mut rho, 2 * n, q, &m);
                        apply_1q(&mut rho, 2 * n, q + n, &m.map(|z| z.conj()));
                    }
                }
            }
            Ok(QuantumState::Density { n, rho })
        }
    }
}

impl QuantumState {
    pub fn n(&self) -> usize {
        match self {
            QuantumState::Statevector { n, .. } | QuantumState::Density { n, .. } => *n,
        }
    }

    /// Computational-basis outcome probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        match self {
            QuantumState::Statevector { amps, .. } => amps.iter().map(|a| a.norm_sqr()).collect(),
            QuantumState::Density { n, rho } => {
                let dim = 1usize << n;
                (0..dim).map(|i| rho[i * dim + i].re.max(0.0)).collect()
            }
        }
    }

    pub fn trace(&self) -> f64 {
        self.probabilities().iter().sum()
    }

    /// Density matrix of the state (outer product for a statevector).
    pub fn density_matrix(&self) -> DMatrix<Complex64> {
        match self {
            QuantumState::Statevector { n, amps } => {
                let dim = 1usize << n;
                DMatrix::from_fn(dim, dim, |r, c| amps[r] * amps[c].conj())
            }
            QuantumState::Density { n, rho } => {
                let dim = 1usize << n;
                DMatrix::from_fn(dim, dim, |r, c| rho[r * dim + c])
            }
        }
    }
}

/// `Pr(0) - Pr(1)` on qubit `q`.
pub fn expectation_z(state: &QuantumState, q: usize) -> Result<f64> {
    let n = state.n();
    if q >= n {
        return Err(Error::QubitIndex(q));
    }
    Ok(z_from_distribution(&state.probabilities(), n, q))
}

pub fn z_from_distribution(p: &[f64], n: usize, q: usize) -> f64 {
    let bit = 1usize << (n - 1 - q);
    p.iter().enumerate().map(|(i, &pi)| if i & bit == 0 { pi } else { -pi }).sum()
}

/// Dense unitary of a circuit, column `j` = image of basis state `j`.
pub fn unitary(c: &Circuit) -> DMatrix<Complex64> {
    let n = c.width;
    let dim = 1usize << n;
    let mut u = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut v = vec![C0; dim];
        v[j] = C1;
        for g in &c.gates {
            apply_gate(&mut v, n, g);
        }
        u.set_column(j, &nalgebra::DVector::from_vec(v));
    }
    u
}

/// Applies the per-qubit confusion matrices to a distribution.
pub fn apply_readout(p: &[f64], n: usize, noise: &NoiseModel) -> Vec<f64> {
    let mut out = p.to_vec();
    for q in 0..n {
        let (p10, p01) = noise.flip(q);
        if p10 == 0.0 && p01 == 0.0 {
            continue;
        }
        stochastic_1q(&mut out, n, q, [1.0 - p10, p01, p10, 1.0 - p01]);
    }
    out
}

/// `m` row-major `[[m00, m01], [m10, m11]]` acting as `p' = m p` on qubit `q`.
fn stochastic_1q(p: &mut [f64], n: usize, q: usize, m: [f64; 4]) {
    let bit = 1usize << (n - 1 - q);
    for i in 0..p.len() {
        if i & bit == 0 {
            let (a, b) = (p[i], p[i | bit]);
            p[i] = m[0] * a + m[1] * b;
            p[i | bit] = m[2] * a + m[3] * b;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShotEntry {
    pub count: u64,
    pub retained: bool,
}

/// Histogram of measured bitstrings.
#[derive(Clone, Debug, PartialEq)]
pub struct ShotRecord {
    pub n: usize,
    pub outcomes: BTreeMap<usize, ShotEntry>,
    pub total_shots: u64,
    pub post_selected: u64,
}

impl ShotRecord {
    pub fn from_counts(n: usize, counts: BTreeMap<usize, u64>) -> Self {
        let total: u64 = counts.values().sum();
        let outcomes = counts.into_iter().filter(|&(_, c)| c > 0).map(|(k, c)| (k, ShotEntry { count: c, retained: true })).collect();
        ShotRecord { n, outcomes, total_shots: total, post_selected: total }
    }

    pub fn distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; 1 << self.n];
        if self.total_shots == 0 {
            return p;
        }
        for (&k, e) in &self.outcomes {
            p[k] = e.count as f64 / self.total_shots as f64;
        }
        p
    }

    /// Estimate of `⟨Z_q⟩` over the retained shots.
    pub fn z_expectation(&self, q: usize) -> Result<f64> {
        if q >= self.n {
            return Err(Error::QubitIndex(q));
        }
        if self.post_selected == 0 {
            return Err(Error::PostSelectionEmpty);
        }
        let bit = 1usize << (self.n - 1 - q);
        let s: i64 = self
            .outcomes
            .iter()
            .filter(|(_, e)| e.retained)
            .map(|(&k, e)| if k & bit == 0 { e.count as i64 } else { -(e.count as i64) })
            .sum();
        Ok(s as f64 / self.post_selected as f64)
    }

    /// Lines `bitstring,count,retained`, qubit 0 first.
    pub fn to_text(&self) -> String {
        let mut s = String::from("outcome,count,retained\n");
        for (&k, e) in &self.outcomes {
            let _ = writeln!(s, "{:0w$b},{},{}", k, e.count, e.retained, w = self.n);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |l: &str| Error::Parse(format!("bad shot line '{l}'"));
        let mut n = None;
        let mut outcomes = BTreeMap::new();
        for l in text.lines().skip(1).map(str::trim).filter(|l| !l.is_empty()) {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 3 {
                return Err(bad(l));
            }
            if *n.get_or_insert(f[0].len()) != f[0].len() {
                return Err(bad(l));
            }
            let k = usize::from_str_radix(f[0], 2).map_err(|_| bad(l))?;
            let count = f[1].parse().map_err(|_| bad(l))?;
            let retained = f[2].parse().map_err(|_| bad(l))?;
            outcomes.insert(k, ShotEntry { count, retained });
        }
        let n = n.ok_or_else(|| Error::Parse("empty shot record".into()))?;
        let total_shots = outcomes.values().map(|e| e.count).sum();
        let post_selected = outcomes.values().filter(|e| e.retained).map(|e| e.count).sum();
        Ok(ShotRecord { n, outcomes, total_shots, post_selected })
    }
}

/// Multinomial sample of `shots` outcomes from `p` (sequential binomials).
pub fn sample_distribution(p: &[f64], shots: u64, rng: &mut ChaCha8Rng) -> BTreeMap<usize, u64> {
    let mut counts = BTreeMap::new();
    let mut left = shots;
    let mut mass: f64 = p.iter().sum();
    for (k, &pk) in p.iter().enumerate() {
        if left == 0 {
            break;
        }
        let q = if mass > 0.0 { (pk / mass).clamp(0.0, 1.0) } else { 0.0 };
        let c = if q >= 1.0 { left } else { Binomial::new(left, q).expect("probability in [0,1]").sample(rng) };
        if c > 0 {
            counts.insert(k, c);
        }
        left -= c;
        mass -= pk;
    }
    counts
}

/// Readout-corrupted multinomial sampling of a state.
pub fn sample_shots(state: &QuantumState, shots: u64, noise: &NoiseModel, seed: u64) -> Result<ShotRecord> {
    if shots == 0 {
        return Err(Error::InvalidParameters("shots must be >= 1".into()));
    }
    noise.validate()?;
    let n = state.n();
    let p = apply_readout(&state.probabilities(), n, noise);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ShotRecord::from_counts(n, sample_distribution(&p, shots, &mut rng)))
}

/// Inverse-confusion correction of an empirical distribution; negative
/// entries are clipped and the result renormalized.
pub fn mitigate_distribution(p: &[f64], n: usize, noise: &NoiseModel) -> Result<Vec<f64>> {
    let mut out = p.to_vec();
    for q in 0..n {
        let (p10, p01) = noise.flip(q);
        if p10 == 0.0 && p01 == 0.0 {
            continue;
        }
        let det = 1.0 - p10 - p01;
        if det.abs() < 1e-12 {
            return Err(Error::SingularConfusion(q));
        }
        stochastic_1q(&mut out, n, q, [(1.0 - p01) / det, -p01 / det, -p10 / det, (1.0 - p10) / det]);
    }
    for v in &mut out {
        *v = v.max(0.0);
    }
    let s: f64 = out.iter().sum();
    if s > 0.0 {
        for v in &mut out {
            *v /= s;
        }
    }
    Ok(out)
}

pub fn mitigate_readout(record: &ShotRecord, noise: &NoiseModel) -> Result<Vec<f64>> {
    mitigate_distribution(&record.distribution(), record.n, noise)
}

/// One particle per spin sector: system bits `(q0 q1)` and `(q2 q3)` each
/// in `{10, 01}`, with system qubit `q` on wire `q + 1`.
pub fn in_sector(outcome: usize, width: usize) -> bool {
    if width < SYSTEM_OFFSET + 4 {
        return false;
    }
    let bit = |q: usize| (outcome >> (width - 1 - (q + SYSTEM_OFFSET))) & 1;
    bit(0) != bit(1) && bit(2) != bit(3)
}

pub fn post_select(record: &ShotRecord) -> Result<ShotRecord> {
    if record.n < SYSTEM_OFFSET + 4 {
        return Err(Error::QubitMismatch(SYSTEM_OFFSET + 4, record.n));
    }
    let mut out = record.clone();
    for (&k, e) in out.outcomes.iter_mut() {
        e.retained = e.retained && in_sector(k, record.n);
    }
    out.post_selected = out.outcomes.values().filter(|e| e.retained).map(|e| e.count).sum();
    if out.post_selected == 0 {
        return Err(Error::PostSelectionEmpty);
    }
    Ok(out)
}

/// Restricts a distribution to the valid sector and renormalizes.
/// Returns the conditional distribution and the retained mass.
pub fn post_select_distribution(p: &[f64], width: usize) -> Result<(Vec<f64>, f64)> {
    let kept: Vec<f64> = p.iter().enumerate().map(|(k, &v)| if in_sector(k, width) { v } else { 0.0 }).collect();
    let mass: f64 = kept.iter().sum();
    if mass <= 0.0 {
        return Err(Error::PostSelectionEmpty);
    }
    Ok((kept.into_iter().map(|v| v / mass).collect(), mass))
}

/// Ancilla estimate of one circuit evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AncillaEstimate {
    pub z: f64,
    pub retention: f64,
}

/// Infinite-shot estimate: post-selection on the exact distribution.
pub fn exact_ancilla_z(p: &[f64], width: usize) -> Result<AncillaEstimate> {
    let (q, mass) = post_select_distribution(p, width)?;
    Ok(AncillaEstimate { z: z_from_distribution(&q, width, 0), retention: mass })
}

/// Finite-shot estimate: readout-corrupted sampling, mitigation,
/// post-selection, then `⟨Z⟩` of wire 0.
pub fn sampled_ancilla_z(p: &[f64], width: usize, shots: u64, noise: &NoiseModel, rng: &mut ChaCha8Rng) -> Result<AncillaEstimate> {
    let noisy = apply_readout(p, width, noise);
    let record = ShotRecord::from_counts(width, sample_distribution(&noisy, shots, rng));
    let raw_retention = post_select(&record).map(|r| r.post_selected as f64 / shots as f64).unwrap_or(0.0);
    let mitigated = mitigate_readout(&record, noise)?;
    let (q, _) = post_select_distribution(&mitigated, width)?;
    Ok(AncillaEstimate { z: z_from_distribution(&q, width, 0), retention: raw_retention })
}
