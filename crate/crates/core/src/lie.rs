//! Dynamical Lie algebra of a Pauli Hamiltonian and its Cartan split.

use std::collections::HashSet;
use std::fmt;

use crate::pauli::{strings_commute, PauliSum, PauliTerm};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    G,
    K,
    M,
    H,
    K0,
    K1,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::G => "g",
            Role::K => "k",
            Role::M => "m",
            Role::H => "h",
            Role::K0 => "k0",
            Role::K1 => "k1",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Ok(match s {
            "g" => Role::G,
            "k" => Role::K,
            "m" => Role::M,
            "h" => Role::H,
            "k0" => Role::K0,
            "k1" => Role::K1,
            _ => return Err(Error::Parse(format!("unknown role '{s}'"))),
        })
    }
}

/// Ordered set of unit Pauli strings spanning a real Lie algebra
/// (each string `P` stands for the direction `iP`).
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraBasis {
    pub role: Role,
    pub n: usize,
    pub elements: Vec<PauliTerm>,
}

impl AlgebraBasis {
    pub fn new(role: Role, n: usize, elements: Vec<PauliTerm>) -> Self {
        AlgebraBasis { role, n, elements: elements.iter().map(|e| e.unit()).collect() }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, p: &PauliTerm) -> bool {
        self.elements.iter().any(|e| e.x_bits == p.x_bits && e.z_bits == p.z_bits)
    }

    pub fn labels(&self) -> Vec<String> {
        self.elements.iter().map(|e| e.label()).collect()
    }

    /// True when every pair of elements commutes.
    pub fn is_abelian(&self) -> bool {
        self.elements.iter().enumerate().all(|(i, a)| self.elements[i + 1..].iter().all(|b| a.commutes_with(b)))
    }

    /// Text dump: header `role=<r> qubits=<n>` then one label per line.
    pub fn dump(&self) -> String {
        let mut s = format!("role={} qubits={}\n", self.role.name(), self.n);
        for e in &self.elements {
            s.push_str(&e.label());
            s.push('\n');
        }
        s
    }

    pub fn load(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty basis file".into()))?;
        let mut role = None;
        let mut n = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("role", r)) => role = Some(Role::from_name(r)?),
                Some(("qubits", q)) => n = Some(q.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?),
                _ => return Err(Error::Parse(format!("bad header field '{field}'"))),
            }
        }
        let (role, n) = match (role, n) {
            (Some(r), Some(n)) => (r, n),
            _ => return Err(Error::Parse("header needs role= and qubits=".into())),
        };
        let mut elements = Vec::new();
        for l in lines {
            let t = PauliTerm::from_label(l)?;
            if t.n != n {
                return Err(Error::QubitMismatch(n, t.n));
            }
            elements.push(t);
        }
        Ok(AlgebraBasis { role, n, elements })
    }
}

impl fmt::Display for AlgebraBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {{{}}}", self.role.name(), self.labels().join(", "))
    }
}

/// Default closure cap, `4^n - 1`.
pub fn default_cap(n: usize) -> usize {
    if n >= 32 {
        usize::MAX
    } else {
        (1usize << (2 * n)) - 1
    }
}

/// Commutator closure of the strings of `h`.
///
/// Breadth-first: level 0 is the (sorted) Hamiltonian strings, each later
/// level holds the new strings from brackets of the previous level with
/// everything found so far, sorted by `(x_bits, z_bits)`.
pub fn generate_closure(h: &PauliSum, cap: Option<usize>) -> Result<AlgebraBasis> {
    let n = h.n();
    let cap = cap.unwrap_or_else(|| default_cap(n));
    let mut level: Vec<(u64, u64)> = h.iter().filter(|t| !t.is_identity()).map(|t| (t.x_bits, t.z_bits)).collect();
    level.sort_unstable();
    level.dedup();
    if level.len() > cap {
        return Err(Error::ClosureCap(cap));
    }
    let mut seen: HashSet<(u64, u64)> = level.iter().copied().collect();
    let mut all = level.clone();
    while !level.is_empty() {
        let mut next = Vec::new();
        for &(xa, za) in &level {
            for &(xb, zb) in &all {
                if strings_commute(xa, za, xb, zb) {
                    continue;
                }
                let s = (xa ^ xb, za ^ zb);
                if seen.insert(s) {
                    next.push(s);
                    if seen.len() > cap {
                        return Err(Error::ClosureCap(cap));
                    }
                }
            }
        }
        next.sort_unstable();
        all.extend_from_slice(&next);
        level = next;
    }
    Ok(AlgebraBasis { role: Role::G, n, elements: all.into_iter().map(|(x, z)| PauliTerm::new(n, x, z)).collect() })
}

/// Y-parity involution: odd Y-count strings form `k`, even ones form `m`.
pub fn involution_split(g: &AlgebraBasis, h: &PauliSum) -> Result<(AlgebraBasis, AlgebraBasis)> {
    if let Some(t) = h.iter().find(|t| t.y_count() % 2 == 1) {
        return Err(Error::OddInvolution(t.label()));
    }
    let (k, m): (Vec<PauliTerm>, Vec<PauliTerm>) = g.elements.iter().partition(|e| e.y_count() % 2 == 1);
    Ok((AlgebraBasis::new(Role::K, g.n, k), AlgebraBasis::new(Role::M, g.n, m)))
}

/// Greedy maximal abelian subset of `m`.
///
/// Seeded with the Hamiltonian string of `m` that has the fewest X/Y
/// factors (earliest in `m` on ties), then `m` is scanned in order.
pub fn find_cartan_subalgebra(m: &AlgebraBasis, h: &PauliSum) -> AlgebraBasis {
    let seed = m
        .elements
        .iter()
        .enumerate()
        .filter(|(_, e)| h.coeff(e.x_bits, e.z_bits) != 0.0)
        .min_by_key(|(i, e)| (e.x_bits.count_ones(), *i))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut chosen: Vec<PauliTerm> = Vec::new();
    if let Some(s) = m.elements.get(seed) {
        chosen.push(*s);
    }
    for e in &m.elements {
        if chosen.iter().all(|c| c.commutes_with(e)) && !chosen.iter().any(|c| c.x_bits == e.x_bits && c.z_bits == e.z_bits) {
            chosen.push(*e);
        }
    }
    AlgebraBasis::new(Role::H, m.n, chosen)
}

/// Splits `k` into strings commuting with `X_0` and the rest.
pub fn partition_k(k: &AlgebraBasis) -> (AlgebraBasis, AlgebraBasis) {
    let x0 = PauliTerm::new(k.n, 1, 0);
    let (a, b): (Vec<PauliTerm>, Vec<PauliTerm>) = k.elements.iter().partition(|e| e.commutes_with(&x0));
    (AlgebraBasis::new(Role::K0, k.n, a), AlgebraBasis::new(Role::K1, k.n, b))
}

/// Checks `[a, b]` lands in the span of `target` for every pair (or is zero).
pub fn brackets_within(a: &AlgebraBasis, b: &AlgebraBasis, target: &AlgebraBasis) -> bool {
    a.elements.iter().all(|x| {
        b.elements.iter().all(|y| x.commutes_with(y) || target.contains(&PauliTerm::new(a.n, x.x_bits ^ y.x_bits, x.z_bits ^ y.z_bits)))
    })
}

/// Every basis set of one Cartan decomposition of a Hamiltonian algebra.
#[derive(Clone, Debug, PartialEq)]
pub struct CartanDecomposition {
    pub g: AlgebraBasis,
    pub k: AlgebraBasis,
    pub m: AlgebraBasis,
    pub h: AlgebraBasis,
    pub k0: AlgebraBasis,
    pub k1: AlgebraBasis,
}

impl CartanDecomposition {
    pub fn from_hamiltonian(ham: &PauliSum) -> Result<Self> {
        let g = generate_closure(ham, None)?;
        let (k, m) = involution_split(&g, ham)?;
        let h = find_cartan_subalgebra(&m, ham);
        let (k0, k1) = partition_k(&k);
        Ok(CartanDecomposition { g, k, m, h, k0, k1 })
    }
}
