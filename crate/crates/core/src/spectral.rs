//! Two-rate Green's-function sampling, DFT spectra, aliasing and the
//! staged ω₁/ω₂ peak detection.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::cartan::CartanSolution;
use crate::circuit::{greens_function_circuit, optimize_circuit, Connectivity};
use crate::sim::{exact_ancilla_z, run, sampled_ancilla_z, NoiseModel};
use crate::{Error, Result};

pub const DEFAULT_SAMPLES: usize = 150;
pub const ZERO_PAD: usize = 4;
/// Peaks must dominate this many padded bins on each side.
const PEAK_RADIUS: usize = 4;
/// Zeroed near-DC region, in resolution bins.
const DC_BINS: usize = 2;
/// Half-width of the ω₂-alias exclusion, in resolution bins.
const ALIAS_EXCLUSION_BINS: f64 = 8.0;
/// ω₁ candidates below this fraction of the strongest line (the masked
/// alias included) are window leakage, not signal.
const LEAKAGE_FLOOR: f64 = 1e-3;
/// Magnitudes below this fraction of `Σ|x|` are rounding noise.
const ROUNDING_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateTag {
    High,
    Low,
}

/// Uniformly sampled `iG(t)` estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct GreensSeries {
    pub dt: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub rate: RateTag,
    /// Mean post-selection retention per time point (1 when not sampled).
    pub retention: Vec<f64>,
}

pub fn time_grid(dt: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * dt).collect()
}

impl GreensSeries {
    pub fn new(dt: f64, values: Vec<f64>, rate: RateTag) -> Self {
        let n = values.len();
        GreensSeries { dt, times: time_grid(dt, n), values, rate, retention: vec![1.0; n] }
    }

    pub fn from_fn(dt: f64, n: usize, rate: RateTag, f: impl Fn(f64) -> f64) -> Self {
        Self::new(dt, time_grid(dt, n).into_iter().map(f).collect(), rate)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Checks the sample instants are strictly increasing and uniform.
    pub fn validate(&self) -> Result<()> {
        if self.times.len() != self.values.len() || self.values.len() < 2 {
            return Err(Error::InvalidParameters("series needs at least two samples".into()));
        }
        let dt = self.times[1] - self.times[0];
        if dt <= 0.0 {
            return Err(Error::InvalidParameters("sample times must increase".into()));
        }
        let tol = 1e-12 * self.times.last().unwrap().abs().max(1.0);
        for w in self.times.windows(2) {
            if (w[1] - w[0] - dt).abs() > tol {
                return Err(Error::InvalidParameters("non-uniform sample spacing".into()));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,iG\n");
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(s, "{t:.16e},{v:.16e}");
        }
        s
    }
}

/// Magnitude spectrum over `ω ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Spacing of the zero-padded grid.
    pub bin_width: f64,
    /// Native resolution `2π/(N·Δt)`, one DFT bin of the unpadded series.
    pub resolution: f64,
}

impl Spectrum {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("omega,magnitude\n");
        for (w, m) in self.frequencies.iter().zip(&self.magnitudes) {
            let _ = writeln!(s, "{w:.16e},{m:.16e}");
        }
        s
    }

    pub fn max_magnitude(&self) -> f64 {
        self.magnitudes.iter().copied().fold(0.0, f64::max)
    }

    /// Magnitude at the bin nearest to `omega`.
    pub fn magnitude_at(&self, omega: f64) -> f64 {
        let i = (omega / self.bin_width).round().max(0.0) as usize;
        self.magnitudes.get(i).copied().unwrap_or(0.0)
    }
}

/// Detected frequencies of one iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakPair {
    pub omega1: f64,
    pub omega2: f64,
    pub found1: bool,
    pub amp1_rel: f64,
    pub amp2_rel: f64,
}

impl PeakPair {
    pub fn expected(omega1: f64, omega2: f64) -> Self {
        PeakPair { omega1, omega2, found1: true, amp1_rel: 0.0, amp2_rel: 0.0 }
    }
}

/// `NINT(x) = ⌈⌊2x⌋/2⌉`, rounding halves up.
pub fn nint(x: f64) -> f64 {
    ((2.0 * x).floor() / 2.0).ceil()
}

/// Frequency observed when `omega` is sampled at angular rate `omega_s`.
pub fn alias_frequency(omega: f64, omega_s: f64) -> f64 {
    (omega - omega_s * nint(omega / omega_s)).abs()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatePolicy {
    /// Sampling rate as a multiple of the target frequency.
    pub multiplier: f64,
    pub min_multiplier: f64,
    pub max_multiplier: f64,
    pub multiplier_step: f64,
    /// Low-rate target used when ω₁ is (near) zero.
    pub min_omega1: f64,
}

impl Default for RatePolicy {
    fn default() -> Self {
        RatePolicy { multiplier: 5.0, min_multiplier: 3.0, max_multiplier: 10.0, multiplier_step: 0.25, min_omega1: 0.01 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingPlan {
    pub dt_high: f64,
    pub dt_low: f64,
    pub mult_high: f64,
    pub mult_low: f64,
}

impl SamplingPlan {
    pub fn omega_s_low(&self) -> f64 {
        2.0 * PI / self.dt_low
    }
}

/// Low-rate multiplier: the default unless the ω₂ alias lands within
/// `ω₁/2` of ω₁, in which case the nearest multiplier in the band that
/// separates them is taken.
pub fn low_rate_multiplier(omega1: f64, omega2: f64, policy: &RatePolicy) -> f64 {
    let clear = |m: f64| (alias_frequency(omega2, m * omega1) / omega1 - 1.0).abs() >= 0.5;
    if omega1 <= 0.0 || clear(policy.multiplier) {
        return policy.multiplier;
    }
    let steps = ((policy.max_multiplier - policy.min_multiplier) / policy.multiplier_step).round() as usize;
    let mut cands: Vec<f64> = (0..=steps).map(|k| policy.min_multiplier + k as f64 * policy.multiplier_step).collect();
    cands.sort_by(|a, b| (a - policy.multiplier).abs().total_cmp(&(b - policy.multiplier).abs()));
    cands.into_iter().find(|&m| clear(m)).unwrap_or(policy.multiplier)
}

pub fn plan_rates(prev: &PeakPair, policy: &RatePolicy) -> Result<SamplingPlan> {
    if prev.omega2.is_nan() || prev.omega2 <= 0.0 {
        return Err(Error::InvalidParameters("ω₂ estimate must be positive".into()));
    }
    let w1 = if prev.omega1 > policy.min_omega1 { prev.omega1 } else { policy.min_omega1 };
    let mult_low = low_rate_multiplier(w1, prev.omega2, policy);
    Ok(SamplingPlan {
        dt_high: 2.0 * PI / (policy.multiplier * prev.omega2),
        dt_low: 2.0 * PI / (mult_low * w1),
        mult_high: policy.multiplier,
        mult_low,
    })
}

/// Hann-tapered, ×4 zero-padded magnitude spectrum of the mean-removed
/// series; bins below two resolution bins are zeroed.
pub fn dft_spectrum(series: &GreensSeries) -> Result<Spectrum> {
    series.validate()?;
    let n = series.len();
    let npad = n * ZERO_PAD;
    let mean = series.values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| Complex::new((v - mean) * (0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos()), 0.0))
        .collect();
    buf.resize(npad, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(npad).process(&mut buf);
    let dt = series.times[1] - series.times[0];
    let bin_width = 2.0 * PI / (npad as f64 * dt);
    let half = npad / 2 + 1;
    let mut magnitudes: Vec<f64> = buf[..half].iter().map(|c| c.norm()).collect();
    for m in magnitudes.iter_mut().take(DC_BINS * ZERO_PAD) {
        *m = 0.0;
    }
    let floor = ROUNDING_FLOOR * series.values.iter().map(|v| v.abs()).sum::<f64>();
    for m in magnitudes.iter_mut().filter(|m| **m < floor) {
        *m = 0.0;
    }
    Ok(Spectrum {
        frequencies: (0..half).map(|k| k as f64 * bin_width).collect(),
        magnitudes,
        bin_width,
        resolution: bin_width * ZERO_PAD as f64,
    })
}

/// Local maxima dominating `PEAK_RADIUS` bins on each side and strictly
/// above their left neighbour.
pub fn find_peaks(f: &[f64]) -> Vec<usize> {
    let n = f.len();
    (1..n.saturating_sub(1))
        .filter(|&i| {
            let lo = i.saturating_sub(PEAK_RADIUS);
            let hi = (i + PEAK_RADIUS).min(n - 1);
            f[i] > 0.0 && f[i] > f[i - 1] && f[lo..=hi].iter().all(|&x| x <= f[i])
        })
        .collect()
}

/// Vertex of the parabola through the bin and its neighbours.
pub fn interpolate_peak(spec: &Spectrum, i: usize) -> f64 {
    let f = &spec.magnitudes;
    if i == 0 || i + 1 >= f.len() {
        return spec.frequencies[i];
    }
    let (a, b, c) = (f[i - 1], f[i], f[i + 1]);
    let den = a - 2.0 * b + c;
    let p = if den == 0.0 { 0.0 } else { 0.5 * (a - c) / den };
    spec.frequencies[i] + p * spec.bin_width
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    if n == 0.0 {
        return (0.0, 0.0);
    }
    let m = xs.clone().sum::<f64>() / n;
    let v = xs.map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Detected peak with its bin and position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub omega: f64,
    pub bin: usize,
    pub magnitude: f64,
}

/// Hubbard-band peak from a high-rate spectrum.
///
/// Bins at or below the midpoint of the expected ω₁ and ω₂ are masked; the
/// threshold is mean + 2σ of the rest. The window around `expected2` grows
/// through 15%, 30%, 60% and finally the full spectrum; window-edge bins
/// are never peaks. The larger of the (up to) two strongest candidates wins.
pub fn detect_omega2(spec: &Spectrum, expected2: f64, expected1: f64) -> Result<Detection> {
    let w = &spec.frequencies;
    let f = &spec.magnitudes;
    let cut = 0.5 * (expected1 + expected2);
    let ok: Vec<bool> = (0..w.len()).map(|i| i >= DC_BINS * ZERO_PAD && w[i] > cut).collect();
    let (m, s) = mean_std((0..w.len()).filter(|&i| ok[i]).map(|i| f[i]));
    let th = m + 2.0 * s;
    let peaks = find_peaks(f);
    for frac in [0.15, 0.3, 0.6, f64::INFINITY] {
        let win: Vec<usize> = (0..w.len()).filter(|&i| ok[i] && (w[i] - expected2).abs() <= frac * expected2).collect();
        let (Some(&first), Some(&last)) = (win.first(), win.last()) else { continue };
        let mut cand: Vec<usize> = peaks.iter().copied().filter(|&i| i > first && i < last && ok[i] && f[i] > th && (w[i] - expected2).abs() <= frac * expected2).collect();
        cand.sort_by(|&a, &b| f[b].total_cmp(&f[a]));
        cand.truncate(2);
        if let Some(&best) = cand.first() {
            return Ok(Detection { omega: interpolate_peak(spec, best), bin: best, magnitude: f[best] });
        }
    }
    Err(Error::Rerun)
}

/// Quasiparticle peak from a low-rate spectrum.
///
/// Bins within eight resolution bins of the ω₂ alias are excluded, as are
/// the DC bins, the spectrum edges and peaks under the leakage floor
/// (a thousandth of the strongest line). Thresholds climb mean → mean + σ →
/// mean + 2σ; the first stage with one or two qualifying peaks returns the
/// strongest, a stage with none ends the search.
pub fn detect_omega1(spec: &Spectrum, omega2: f64, omega_s: f64) -> Result<Detection> {
    let w = &spec.frequencies;
    let f = &spec.magnitudes;
    let n = w.len();
    let a = alias_frequency(omega2, omega_s);
    let ok: Vec<bool> = (0..n).map(|i| i >= DC_BINS * ZERO_PAD && (w[i] - a).abs() > ALIAS_EXCLUSION_BINS * spec.resolution).collect();
    let (m, s) = mean_std((0..n).filter(|&i| ok[i]).map(|i| f[i]));
    let floor = LEAKAGE_FLOOR * f.iter().copied().fold(0.0, f64::max);
    let peaks: Vec<usize> = find_peaks(f).into_iter().filter(|&i| ok[i] && i + 2 < n && f[i] > floor).collect();
    for th in [m, m + s, m + 2.0 * s] {
        let q: Vec<usize> = peaks.iter().copied().filter(|&i| f[i] > th).collect();
        match q.len() {
            0 => break,
            1 | 2 => {
                let best = *q.iter().max_by(|&&x, &&y| f[x].total_cmp(&f[y])).unwrap();
                return Ok(Detection { omega: interpolate_peak(spec, best), bin: best, magnitude: f[best] });
            }
            _ => {}
        }
    }
    Err(Error::Rerun)
}

/// Single strongest peak; used when the spectrum has one pole (U = 0).
pub fn detect_single(spec: &Spectrum) -> Result<Detection> {
    let f = &spec.magnitudes;
    let best = find_peaks(f).into_iter().max_by(|&a, &b| f[a].total_cmp(&f[b])).ok_or(Error::Rerun)?;
    Ok(Detection { omega: interpolate_peak(spec, best), bin: best, magnitude: f[best] })
}

/// How the Green's function is evaluated at each time point.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureConfig {
    pub samples: usize,
    /// `None` evaluates the exact post-selected expectation.
    pub shots: Option<u64>,
    /// `None` runs the noiseless statevector.
    pub noise: Option<NoiseModel>,
    pub connectivity: Connectivity,
    pub optimize: bool,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig { samples: DEFAULT_SAMPLES, shots: None, noise: None, connectivity: Connectivity::Linear, optimize: true }
    }
}

impl MeasureConfig {
    pub fn noisy(shots: u64, noise: NoiseModel) -> Self {
        MeasureConfig { shots: Some(shots), noise: Some(noise), ..Default::default() }
    }
}

/// Exact outcome distributions `[time][solution]` of the Green's-function
/// circuits; the expensive part of a measurement, reusable across shot
/// trials.
pub fn exact_distributions(sols: &[CartanSolution], theta_gs: f64, times: &[f64], cfg: &MeasureConfig) -> Result<Vec<Vec<Vec<f64>>>> {
    if sols.is_empty() {
        return Err(Error::InvalidParameters("at least one Cartan solution required".into()));
    }
    times
        .par_iter()
        .map(|&t| {
            sols.iter()
                .map(|sol| {
                    let c = greens_function_circuit(sol, t, theta_gs, cfg.connectivity)?;
                    let c = if cfg.optimize { optimize_circuit(&c) } else { c };
                    Ok(run(&c, cfg.noise.as_ref())?.probabilities())
                })
                .collect()
        })
        .collect()
}

/// Turns distributions into a series: exact post-selected expectations,
/// or per-(time, solution) seeded shot sampling, averaged over solutions.
pub fn series_from_distributions(dists: &[Vec<Vec<f64>>], dt: f64, rate: RateTag, cfg: &MeasureConfig, seed: u64) -> Result<GreensSeries> {
    let noise = cfg.noise.clone().unwrap_or_else(|| NoiseModel::depolarizing(0.0));
    let points: Vec<(f64, f64)> = dists
        .par_iter()
        .enumerate()
        .map(|(ti, per_sol)| {
            let mut z = 0.0;
            let mut keep = 0.0;
            for (si, p) in per_sol.iter().enumerate() {
                let width = p.len().trailing_zeros() as usize;
                let est = match cfg.shots {
                    None => exact_ancilla_z(p, width)?,
                    Some(shots) => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        rng.set_stream((ti * per_sol.len() + si) as u64);
                        sampled_ancilla_z(p, width, shots, &noise, &mut rng)?
                    }
                };
                z += est.z;
                keep += est.retention;
            }
            let k = per_sol.len() as f64;
            Ok((z / k, keep / k))
        })
        .collect::<Result<_>>()?;
    let mut s = GreensSeries::new(dt, points.iter().map(|p| p.0).collect(), rate);
    s.retention = points.iter().map(|p| p.1).collect();
    Ok(s)
}

/// Measures `iG(t)` at `cfg.samples` points spaced `dt`.
pub fn measure_series(sols: &[CartanSolution], theta_gs: f64, dt: f64, rate: RateTag, cfg: &MeasureConfig, seed: u64) -> Result<GreensSeries> {
    let times = time_grid(dt, cfg.samples);
    let dists = exact_distributions(sols, theta_gs, &times, cfg)?;
    series_from_distributions(&dists, dt, rate, cfg, seed)
}
