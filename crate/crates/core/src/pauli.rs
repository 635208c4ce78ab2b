//! Pauli strings in symplectic form, sums of Hermitian strings, and the
//! Jordan–Wigner form of the Anderson impurity Hamiltonian.
//!
//! A string is stored as two bit masks with bit `q` standing for qubit `q`.
//! The Hermitian operator attached to `(x, z)` is
//! `P(x, z) = i^{|x & z|} X^x Z^z`, so that a `1` in both masks is a `Y`.
//! A [`PauliTerm`] carries an extra phase `i^phase` and a real coefficient.

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

/// Largest qubit count accepted by the bit-mask encoding.
pub const MAX_QUBITS: usize = 64;

#[inline]
fn pc(v: u64) -> u32 {
    v.count_ones()
}

/// Phase `i^k` as a complex number.
pub fn phase_value(k: u8) -> Complex64 {
    match k & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Phase exponent (mod 4) of `P(x1,z1) P(x2,z2) = i^k P(x1^x2, z1^z2)`.
#[inline]
pub fn product_phase(x1: u64, z1: u64, x2: u64, z2: u64) -> u8 {
    let x3 = x1 ^ x2;
    let z3 = z1 ^ z2;
    let k = pc(x1 & z1) as i64 + pc(x2 & z2) as i64 + 2 * pc(z1 & x2) as i64 - pc(x3 & z3) as i64;
    k.rem_euclid(4) as u8
}

/// True when the two strings commute.
#[inline]
pub fn strings_commute(x1: u64, z1: u64, x2: u64, z2: u64) -> bool {
    pc((x1 & z2) ^ (z1 & x2)).is_multiple_of(2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliTerm {
    pub n: usize,
    pub x_bits: u64,
    pub z_bits: u64,
    /// Power of `i` multiplying the Hermitian string.
    pub phase: u8,
    pub coeff: f64,
}

impl PauliTerm {
    pub fn new(n: usize, x_bits: u64, z_bits: u64) -> Self {
        PauliTerm { n, x_bits, z_bits, phase: 0, coeff: 1.0 }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, 0, 0)
    }

    /// Single-qubit Pauli `op` (one of `I X Y Z`) on qubit `q`.
    pub fn single(n: usize, q: usize, op: char) -> Result<Self> {
        if q >= n {
            return Err(Error::QubitIndex(q));
        }
        let b = 1u64 << q;
        let (x, z) = match op {
            'I' => (0, 0),
            'X' => (b, 0),
            'Y' => (b, b),
            'Z' => (0, b),
            _ => return Err(Error::Parse(format!("unknown Pauli '{op}'"))),
        };
        Ok(Self::new(n, x, z))
    }

    /// Parses a bare label such as `XXII` (qubit 0 leftmost).
    pub fn from_label(label: &str) -> Result<Self> {
        let n = label.chars().count();
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::Parse(format!("bad label length in '{label}'")));
        }
        let mut x = 0u64;
        let mut z = 0u64;
        for (q, c) in label.chars().enumerate() {
            let b = 1u64 << q;
            match c {
                'I' => {}
                'X' => x |= b,
                'Y' => {
                    x |= b;
                    z |= b
                }
                'Z' => z |= b,
                _ => return Err(Error::Parse(format!("unknown Pauli '{c}' in '{label}'"))),
            }
        }
        Ok(Self::new(n, x, z))
    }

    pub fn label(&self) -> String {
        string_label(self.n, self.x_bits, self.z_bits)
    }

    pub fn is_identity(&self) -> bool {
        self.x_bits == 0 && self.z_bits == 0
    }

    /// Number of non-identity factors.
    pub fn weight(&self) -> u32 {
        pc(self.x_bits | self.z_bits)
    }

    pub fn y_count(&self) -> u32 {
        pc(self.x_bits & self.z_bits)
    }

    /// Qubits carrying a non-identity factor, ascending.
    pub fn support(&self) -> Vec<usize> {
        let m = self.x_bits | self.z_bits;
        (0..self.n).filter(|q| m >> q & 1 == 1).collect()
    }

    /// Factor on qubit `q` as one of `I X Y Z`.
    pub fn op_at(&self, q: usize) -> char {
        match (self.x_bits >> q & 1, self.z_bits >> q & 1) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (1, 1) => 'Y',
            _ => 'Z',
        }
    }

    pub fn commutes_with(&self, other: &PauliTerm) -> bool {
        strings_commute(self.x_bits, self.z_bits, other.x_bits, other.z_bits)
    }

    /// Unit-coefficient copy of the bare string.
    pub fn unit(&self) -> Self {
        Self::new(self.n, self.x_bits, self.z_bits)
    }

    /// Full complex prefactor `coeff · i^phase`.
    pub fn scalar(&self) -> Complex64 {
        phase_value(self.phase) * self.coeff
    }

    /// Real coefficient when the term is Hermitian (phase ±1).
    pub fn real_coeff(&self) -> Option<f64> {
        match self.phase & 3 {
            0 => Some(self.coeff),
            2 => Some(-self.coeff),
            _ => None,
        }
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let mut m = string_matrix(self.n, self.x_bits, self.z_bits);
        m *= self.scalar();
        m
    }
}

impl fmt::Display for PauliTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = ["", "i", "-", "-i"][(self.phase & 3) as usize];
        write!(f, "{p}{:?}*{}", self.coeff, self.label())
    }
}

fn string_label(n: usize, x: u64, z: u64) -> String {
    (0..n)
        .map(|q| match (x >> q & 1, z >> q & 1) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (1, 1) => 'Y',
            _ => 'Z',
        })
        .collect()
}

/// Reverses the low `n` bits so that qubit 0 becomes the most significant bit.
#[inline]
pub fn index_mask(mask: u64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    (mask.reverse_bits() >> (64 - n)) as usize
}

/// Dense matrix of the Hermitian string `P(x, z)`.
pub fn string_matrix(n: usize, x: u64, z: u64) -> DMatrix<Complex64> {
    assert!(n <= 16, "dense matrices limited to 16 qubits");
    let dim = 1usize << n;
    let xm = index_mask(x, n);
    let zm = index_mask(z, n);
    let base = phase_value((pc(x & z) % 4) as u8);
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let sign = if (zm & col).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        m[(col ^ xm, col)] = base * sign;
    }
    m
}

pub fn multiply(a: &PauliTerm, b: &PauliTerm) -> Result<PauliTerm> {
    if a.n != b.n {
        return Err(Error::QubitMismatch(a.n, b.n));
    }
    let k = product_phase(a.x_bits, a.z_bits, b.x_bits, b.z_bits);
    Ok(PauliTerm {
        n: a.n,
        x_bits: a.x_bits ^ b.x_bits,
        z_bits: a.z_bits ^ b.z_bits,
        phase: (a.phase + b.phase + k) & 3,
        coeff: a.coeff * b.coeff,
    })
}

/// `[a, b]`, or `None` when the strings commute.
pub fn commutator(a: &PauliTerm, b: &PauliTerm) -> Result<Option<PauliTerm>> {
    if a.n != b.n {
        return Err(Error::QubitMismatch(a.n, b.n));
    }
    if a.commutes_with(b) {
        return Ok(None);
    }
    let mut ab = multiply(a, b)?;
    ab.coeff *= 2.0;
    Ok(Some(ab))
}

/// Real linear combination of distinct Hermitian strings.
///
/// Terms keep insertion order; merged duplicates sum and exact zeros are
/// removed.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n: usize,
    terms: IndexMap<(u64, u64), f64>,
}

impl PauliSum {
    pub fn new(n: usize) -> Self {
        PauliSum { n, terms: IndexMap::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds `coeff · P(x, z)`.
    pub fn add(&mut self, x: u64, z: u64, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let e = self.terms.entry((x, z)).or_insert(0.0);
        *e += coeff;
        if *e == 0.0 {
            self.terms.shift_remove(&(x, z));
        }
    }

    /// Adds a Hermitian term; phases ±i are rejected.
    pub fn add_term(&mut self, t: &PauliTerm) -> Result<()> {
        if t.n != self.n {
            return Err(Error::QubitMismatch(self.n, t.n));
        }
        let c = t.real_coeff().ok_or_else(|| Error::NonHermitian(t.to_string()))?;
        self.add(t.x_bits, t.z_bits, c);
        Ok(())
    }

    pub fn from_terms(n: usize, terms: &[PauliTerm]) -> Result<Self> {
        let mut s = PauliSum::new(n);
        for t in terms {
            s.add_term(t)?;
        }
        Ok(s)
    }

    pub fn coeff(&self, x: u64, z: u64) -> f64 {
        self.terms.get(&(x, z)).copied().unwrap_or(0.0)
    }

    /// Terms as unit-phase `PauliTerm`s with real coefficients.
    pub fn iter(&self) -> impl Iterator<Item = PauliTerm> + '_ {
        self.terms.iter().map(move |(&(x, z), &c)| PauliTerm { n: self.n, x_bits: x, z_bits: z, phase: 0, coeff: c })
    }

    pub fn scale(&mut self, s: f64) {
        if s == 0.0 {
            self.terms.clear();
            return;
        }
        for c in self.terms.values_mut() {
            *c *= s;
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut o = self.clone();
        o.scale(s);
        o
    }

    pub fn add_sum(&mut self, other: &PauliSum, s: f64) -> Result<()> {
        if other.n != self.n {
            return Err(Error::QubitMismatch(self.n, other.n));
        }
        for (&(x, z), &c) in &other.terms {
            self.add(x, z, s * c);
        }
        Ok(())
    }

    /// Drops terms with `|coeff| <= tol`.
    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.abs() > tol);
    }

    /// `sqrt(<s, s>)`.
    pub fn norm(&self) -> f64 {
        self.terms.values().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Same sum without the identity component.
    pub fn traceless(&self) -> Self {
        let mut o = self.clone();
        o.terms.shift_remove(&(0, 0));
        o
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n;
        let mut m = DMatrix::zeros(dim, dim);
        for (&(x, z), &c) in &self.terms {
            m += string_matrix(self.n, x, z) * Complex64::new(c, 0.0);
        }
        m
    }
}

/// Normalized trace inner product `Tr(AB) / 2^n`.
pub fn trace_inner(a: &PauliSum, b: &PauliSum) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::QubitMismatch(a.n, b.n));
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    Ok(small.terms.iter().map(|(k, c)| c * large.terms.get(k).copied().unwrap_or(0.0)).sum())
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (&(x, z), &c)) in self.terms.iter().enumerate() {
            let label = string_label(self.n, x, z);
            match (i, c.is_sign_negative()) {
                (0, _) => write!(f, "{c:?}*{label}")?,
                (_, false) => write!(f, " + {c:?}*{label}")?,
                (_, true) => write!(f, " - {:?}*{label}", -c)?,
            }
        }
        Ok(())
    }
}

impl FromStr for PauliSum {
    type Err = Error;

    /// Parses `0.5*XXII + 1.0*ZIZI`; binary operators must be space separated.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut n: Option<usize> = None;
        let mut parsed: Vec<(f64, PauliTerm)> = Vec::new();
        let mut sign = 1.0;
        let mut expect_term = true;
        for tok in s.split_whitespace() {
            if !expect_term {
                sign = match tok {
                    "+" => 1.0,
                    "-" => -1.0,
                    _ => return Err(Error::Parse(format!("expected '+' or '-', got '{tok}'"))),
                };
                expect_term = true;
                continue;
            }
            let (c, label) = match tok.rsplit_once('*') {
                Some((c, l)) => (c.parse::<f64>().map_err(|e| Error::Parse(format!("{tok}: {e}")))?, l),
                None => (1.0, tok),
            };
            if !c.is_finite() {
                return Err(Error::Parse(format!("non-finite coefficient in '{tok}'")));
            }
            let t = PauliTerm::from_label(label)?;
            match n {
                None => n = Some(t.n),
                Some(m) if m != t.n => return Err(Error::QubitMismatch(m, t.n)),
                _ => {}
            }
            parsed.push((sign * c, t));
            sign = 1.0;
            expect_term = false;
        }
        if expect_term {
            return Err(Error::Parse(format!("dangling operator or empty input in '{s}'")));
        }
        let mut out = PauliSum::new(n.unwrap());
        for (c, t) in parsed {
            out.add(t.x_bits, t.z_bits, c);
        }
        Ok(out)
    }
}

/// Parameters of the Anderson impurity model with `n_bath` bath sites.
#[derive(Clone, Debug, PartialEq)]
pub struct AimParameters {
    pub n_bath: usize,
    /// Hybridization of bath site `i + 1`.
    pub v: Vec<f64>,
    /// On-site energies, impurity first (`n_bath + 1` entries).
    pub epsilon: Vec<f64>,
    pub u: f64,
    pub mu: f64,
}

impl AimParameters {
    /// Two-site model at half filling: `mu = U/2`, `eps_0 = 0`, `eps_1 = U/2`.
    pub fn half_filled_two_site(u: f64, v: f64) -> Self {
        AimParameters { n_bath: 1, v: vec![v], epsilon: vec![0.0, u / 2.0], u, mu: u / 2.0 }
    }

    pub fn n_qubits(&self) -> usize {
        2 * (self.n_bath + 1)
    }
}

/// Jordan–Wigner image of the impurity Hamiltonian, identity part dropped.
pub fn jw_aim_hamiltonian(p: &AimParameters) -> Result<PauliSum> {
    if p.n_bath < 1 {
        return Err(Error::InvalidParameters("n_bath must be at least 1".into()));
    }
    if p.u < 0.0 || !p.u.is_finite() {
        return Err(Error::InvalidParameters(format!("U must be finite and non-negative, got {}", p.u)));
    }
    if p.v.len() != p.n_bath || p.epsilon.len() != p.n_bath + 1 {
        return Err(Error::InvalidParameters("need n_bath hybridizations and n_bath+1 energies".into()));
    }
    let nb = p.n_bath;
    let n = p.n_qubits();
    if n > MAX_QUBITS {
        return Err(Error::InvalidParameters("too many modes".into()));
    }
    let mut h = PauliSum::new(n);
    for i in 1..=nb {
        let vi = p.v[i - 1] / 2.0;
        for off in [0, nb + 1] {
            let ends = (1u64 << off) | (1u64 << (off + i));
            let chain: u64 = (off + 1..off + i).fold(0, |m, q| m | 1u64 << q);
            h.add(ends, chain, vi);
            h.add(ends, chain | ends, vi);
        }
    }
    let up = 1u64 << 0;
    let dn = 1u64 << (nb + 1);
    h.add(0, up | dn, p.u / 4.0);
    h.add(0, up, -p.u / 4.0);
    h.add(0, dn, -p.u / 4.0);
    for i in 0..=nb {
        let c = -(p.epsilon[i] - p.mu) / 2.0;
        h.add(0, 1u64 << i, c);
        h.add(0, 1u64 << (nb + 1 + i), c);
    }
    h.prune(0.0);
    Ok(h)
}

/// Half-filled two-site Hamiltonian `(V/2)(XX+YY on 01 and 23) + (U/4) Z0 Z2`.
pub fn two_site_hamiltonian(u: f64, v: f64) -> Result<PauliSum> {
    jw_aim_hamiltonian(&AimParameters::half_filled_two_site(u, v))
}
