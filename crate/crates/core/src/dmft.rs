//! Two-site DMFT self-consistency: quasiparticle weight, pole amplitudes,
//! the spectral function and the V ← √Z loop.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cartan::{solve_many, SolveOptions};
use crate::circuit::optimize_ansatz_angle;
use crate::lie::CartanDecomposition;
use crate::pauli::two_site_hamiltonian;
use crate::spectral::{
    dft_spectrum, detect_omega1, detect_omega2, detect_single, measure_series, plan_rates, MeasureConfig, PeakPair, RatePolicy, RateTag,
    SamplingPlan,
};
use crate::{Error, Result};

/// `Z = ω₁²ω₂² / (V²(ω₁² + ω₂² − V²))`.
pub fn quasiparticle_weight(omega1: f64, omega2: f64, v: f64) -> Result<f64> {
    if v == 0.0 {
        return Err(Error::InvalidParameters("V must be nonzero".into()));
    }
    let (x1, x2, v2) = (omega1 * omega1, omega2 * omega2, v * v);
    let den = v2 * (x1 + x2 - v2);
    if den <= 0.0 {
        return Err(Error::InvalidGeometry(format!("ω1²+ω2²−V² ≤ 0 for ω1={omega1}, ω2={omega2}, V={v}")));
    }
    Ok(x1 * x2 / den)
}

/// Pole weights from the sum rule and the regularity of Σ at ω = 0.
pub fn amplitudes(omega1: f64, omega2: f64, v: f64) -> Result<(f64, f64)> {
    if v == 0.0 {
        return Err(Error::InvalidParameters("V must be nonzero".into()));
    }
    if omega1 == omega2 {
        return Err(Error::DegeneratePoles);
    }
    let a2 = ((omega1 / v).powi(2) - 1.0) / (2.0 * ((omega1 / omega2).powi(2) - 1.0));
    Ok((0.5 - a2, a2))
}

/// Exact `Z` of the self-consistent two-site solution.
pub fn z_exact(u: f64) -> f64 {
    if u < 6.0 {
        1.0 - (u / 6.0).powi(2)
    } else {
        0.0
    }
}

/// Four-pole Green's function `Σ_i α_i [1/(ω−ω_i) + 1/(ω+ω_i)]` and the
/// self-energy it implies against `G₀` with hybridization `V`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelfEnergyModel {
    pub omega1: f64,
    pub omega2: f64,
    pub v: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

impl SelfEnergyModel {
    /// Model with amplitudes fixed by [`amplitudes`].
    pub fn from_frequencies(omega1: f64, omega2: f64, v: f64) -> Result<Self> {
        let (alpha1, alpha2) = amplitudes(omega1, omega2, v)?;
        Ok(SelfEnergyModel { omega1, omega2, v, alpha1, alpha2 })
    }

    pub fn green(&self, z: Complex64) -> Complex64 {
        let pole = |a: f64, w: f64| a / (z - w) + a / (z + w);
        pole(self.alpha1, self.omega1) + pole(self.alpha2, self.omega2)
    }

    pub fn green0(&self, z: Complex64) -> Complex64 {
        0.5 / (z - self.v) + 0.5 / (z + self.v)
    }

    /// Dyson form `1/G₀ − 1/G` on the real axis.
    pub fn self_energy(&self, omega: f64) -> f64 {
        let (w2, x1, x2) = (omega * omega, self.omega1.powi(2), self.omega2.powi(2));
        let (a1, a2) = (self.alpha1, self.alpha2);
        (w2 - self.v * self.v) / omega - (w2 - x1) * (w2 - x2) / (2.0 * omega * (w2 * (a1 + a2) - (a1 * x2 + a2 * x1)))
    }

    /// `A(ω) = −Im G(ω + iη)/π` on `grid`.
    pub fn spectral_function(&self, eta: f64, grid: &[f64]) -> Vec<f64> {
        grid.iter().map(|&w| -self.green(Complex64::new(w, eta)).im / std::f64::consts::PI).collect()
    }
}

/// Uniform grid of `n` points on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo; n];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Closed-form poles of the half-filled two-site model,
/// `ω₁,₂ = (√(U² + 64V²) ∓ √(U² + 16V²))/4`, with amplitudes from
/// [`amplitudes`]. At `U = 0` only the pole at `V` carries weight.
pub fn two_site_poles(u: f64, v: f64) -> Result<SelfEnergyModel> {
    if v <= 0.0 {
        return Err(Error::InvalidParameters("V must be positive".into()));
    }
    let a = (u * u + 64.0 * v * v).sqrt() / 4.0;
    let b = (u * u + 16.0 * v * v).sqrt() / 4.0;
    SelfEnergyModel::from_frequencies(a - b, a + b, v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Tolerance,
    MaxIter,
    Omega1NotFound,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Tolerance => "tolerance",
            Termination::MaxIter => "max_iter",
            Termination::Omega1NotFound => "omega1_not_found",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DmftConfig {
    pub v0: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Cartan solutions averaged per time point.
    pub solutions: usize,
    pub seed: u64,
    pub max_reruns: usize,
    /// Linear mixing weight of the previous V (0 = plain substitution).
    pub mixing: f64,
    pub measure: MeasureConfig,
    pub rates: RatePolicy,
    pub solve: SolveOptions,
}

impl Default for DmftConfig {
    fn default() -> Self {
        DmftConfig {
            v0: 0.5,
            tol: 0.02,
            max_iter: 25,
            solutions: 2,
            seed: 1,
            max_reruns: 3,
            mixing: 0.0,
            measure: MeasureConfig::default(),
            rates: RatePolicy::default(),
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Hybridization the iteration was measured at.
    pub v: f64,
    pub omega1: f64,
    pub omega2: f64,
    /// Clamped weight used for the update.
    pub z: f64,
    pub z_raw: f64,
    /// Raw Z exceeded 1.
    pub flagged: bool,
    pub reruns: usize,
    pub plan: SamplingPlan,
    pub amp1_rel: f64,
    pub amp2_rel: f64,
    pub min_retention: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DmftState {
    pub u: f64,
    /// Hybridization after the last update.
    pub v: f64,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub terminated: Termination,
    /// Z of the last completed iteration that was not flagged (0 when ω₁
    /// vanished first).
    pub z_final: f64,
    /// Mean of the last two V values produced by the loop.
    pub v_avg: f64,
}

impl DmftState {
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iteration,V,omega1,omega2,Z,Z_raw,flagged,reruns,dt_high,dt_low\n");
        for r in &self.history {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{:.16e},{:.16e}",
                r.iteration, r.v, r.omega1, r.omega2, r.z, r.z_raw, r.flagged, r.reruns, r.plan.dt_high, r.plan.dt_low
            );
        }
        s
    }
}

fn iteration_seed(base: u64, iteration: usize, attempt: usize, rate: RateTag) -> u64 {
    let tag = match rate {
        RateTag::High => 0,
        RateTag::Low => 1,
    };
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((iteration as u64) << 32) ^ ((attempt as u64) << 8) ^ tag
}

/// Runs the self-consistency loop at interaction `u`.
pub fn dmft_iterate(u: f64, cfg: &DmftConfig) -> Result<DmftState> {
    if cfg.v0.is_nan() || cfg.v0 <= 0.0 || u < 0.0 || cfg.solutions == 0 {
        return Err(Error::InvalidParameters("need V0 > 0, U ≥ 0 and at least one solution".into()));
    }
    let dec = CartanDecomposition::from_hamiltonian(&two_site_hamiltonian(u, cfg.v0)?)?;
    let single_pole = u == 0.0;
    let init = two_site_poles(u, cfg.v0)?;
    let mut prev = if single_pole { PeakPair::expected(init.omega1, init.omega1) } else { PeakPair::expected(init.omega1, init.omega2) };
    let mut v = cfg.v0;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut vs = vec![v];
    let mut terminated = Termination::MaxIter;

    for it in 0..cfg.max_iter {
        let ham = two_site_hamiltonian(u, v)?;
        let sols = solve_many(&ham, &dec, cfg.seed.wrapping_add(1000 * it as u64), cfg.solutions, &cfg.solve)?;
        let theta = optimize_ansatz_angle(u, v)?;
        let plan = plan_rates(&prev, &cfg.rates)?;

        let mut reruns = 0;
        let mut min_retention: f64 = 1.0;
        let (omega2, mag2, max_high) = loop {
            let s = measure_series(&sols, theta, plan.dt_high, RateTag::High, &cfg.measure, iteration_seed(cfg.seed, it, reruns, RateTag::High))?;
            min_retention = s.retention.iter().copied().fold(min_retention, f64::min);
            let spec = dft_spectrum(&s)?;
            let det = if single_pole { detect_single(&spec) } else { detect_omega2(&spec, prev.omega2, prev.omega1) };
            match det {
                Ok(d) => break (d.omega, d.magnitude, spec.max_magnitude()),
                Err(Error::Rerun) if reruns < cfg.max_reruns => reruns += 1,
                Err(e) => return Err(e),
            }
        };

        let (omega1, amp1_rel) = if single_pole {
            (omega2, 1.0)
        } else {
            let plan_low = plan_rates(&PeakPair { omega2, ..prev }, &cfg.rates)?;
            let mut attempt = 0;
            let found = loop {
                let s = measure_series(&sols, theta, plan_low.dt_low, RateTag::Low, &cfg.measure, iteration_seed(cfg.seed, it, attempt, RateTag::Low))?;
                min_retention = s.retention.iter().copied().fold(min_retention, f64::min);
                let spec = dft_spectrum(&s)?;
                match detect_omega1(&spec, omega2, plan_low.omega_s_low()) {
                    Ok(d) => break Some((d.omega, d.magnitude / spec.max_magnitude().max(f64::MIN_POSITIVE))),
                    Err(Error::Rerun) if attempt < cfg.max_reruns => attempt += 1,
                    Err(Error::Rerun) => break None,
                    Err(e) => return Err(e),
                }
            };
            reruns += attempt;
            match found {
                Some(x) => x,
                None => {
                    terminated = Termination::Omega1NotFound;
                    break;
                }
            }
        };

        let z_raw = quasiparticle_weight(omega1, omega2, v)?;
        let z = z_raw.min(1.0);
        let v_new = (1.0 - cfg.mixing) * z.sqrt() + cfg.mixing * v;
        let plan_used = if single_pole { plan } else { plan_rates(&PeakPair { omega2, ..prev }, &cfg.rates)? };
        history.push(IterationRecord {
            iteration: it,
            v,
            omega1,
            omega2,
            z,
            z_raw,
            flagged: z_raw > 1.0,
            reruns,
            plan: plan_used,
            amp1_rel,
            amp2_rel: mag2 / max_high.max(f64::MIN_POSITIVE),
            min_retention,
        });
        let dv = v_new - v;
        v = v_new;
        vs.push(v);
        prev = PeakPair { omega1, omega2, found1: true, amp1_rel, amp2_rel: 0.0 };
        // The first step compares against the arbitrary V0, not a loop result.
        if it > 0 && dv.abs() <= cfg.tol {
            terminated = Termination::Tolerance;
            break;
        }
    }

    let z_final = match terminated {
        Termination::Omega1NotFound => 0.0,
        _ => history.iter().rev().find(|r| !r.flagged).or(history.last()).map(|r| r.z).unwrap_or(0.0),
    };
    let tail = &vs[vs.len().saturating_sub(2)..];
    Ok(DmftState {
        u,
        v,
        converged: terminated == Termination::Tolerance,
        terminated,
        z_final,
        v_avg: tail.iter().sum::<f64>() / tail.len() as f64,
        history,
    })
}

/// One row of the phase diagram.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseRow {
    pub u: f64,
    pub z_exact: f64,
    pub outcome: std::result::Result<DmftState, Error>,
}

impl PhaseRow {
    pub fn z_final(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|s| s.z_final)
    }
}

/// Independent loops per `U`, run in parallel; failures are kept per row.
pub fn phase_diagram(us: &[f64], cfg: &DmftConfig) -> Vec<PhaseRow> {
    us.par_iter().map(|&u| PhaseRow { u, z_exact: z_exact(u), outcome: dmft_iterate(u, cfg) }).collect()
}

pub fn phase_csv(rows: &[PhaseRow]) -> String {
    let mut s = String::from("U,Z_final,Z_exact,iterations,terminated_reason\n");
    for r in rows {
        match &r.outcome {
            Ok(st) => {
                let _ = writeln!(s, "{},{:.16e},{:.16e},{},{}", r.u, st.z_final, r.z_exact, st.history.len(), st.terminated.name());
            }
            Err(e) => {
                let _ = writeln!(s, "{},NaN,{:.16e},0,error: {}", r.u, r.z_exact, e.to_string().replace(',', ";"));
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insulator_has_zero_weight() {
        assert_eq!(quasiparticle_weight(0.0, 4.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_poles_give_unit_weight() {
        assert!((quasiparticle_weight(0.7, 0.7, 0.7).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(amplitudes(0.7, 0.7, 0.7), Err(Error::DegeneratePoles));
    }

    #[test]
    fn bad_geometry_rejected() {
        assert!(matches!(quasiparticle_weight(0.1, 0.1, 1.0), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn exact_curve() {
        assert!((z_exact(2.0) - 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(z_exact(7.0), 0.0);
    }
}
