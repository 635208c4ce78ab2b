mod common;

use std::f64::consts::PI;

use common::*;
use khk_dmft::cartan::{solve_many, SolveOptions};
use khk_dmft::circuit::optimize_ansatz_angle;
use khk_dmft::lie::CartanDecomposition;
use khk_dmft::pauli::two_site_hamiltonian;
use khk_dmft::spectral::*;
use khk_dmft::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = DEFAULT_SAMPLES;

/// Index of the largest plain DFT magnitude over `0..=n/2`.
fn dense_dft_argmax(x: &[f64]) -> usize {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (re, im) = x.iter().enumerate().fold((0.0, 0.0), |(re, im), (j, &v)| {
                let ph = -2.0 * PI * (k * j) as f64 / n as f64;
                (re + v * ph.cos(), im + v * ph.sin())
            });
            (k, re * re + im * im)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0
}

fn strongest(spec: &Spectrum) -> f64 {
    let f = &spec.magnitudes;
    let i = find_peaks(f).into_iter().max_by(|&a, &b| f[a].total_cmp(&f[b])).unwrap();
    interpolate_peak(spec, i)
}

#[test]
fn alias_matches_dense_dft_for_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let omega = rng.random_range(0.2..25.0);
        let omega_s = rng.random_range(1.0..30.0);
        let a = alias_frequency(omega, omega_s);
        assert!((0.0..=omega_s / 2.0 + 1e-12).contains(&a));
        let dt = 2.0 * PI / omega_s;
        let x: Vec<f64> = (0..N).map(|k| (omega * k as f64 * dt).cos()).collect();
        let resolution = omega_s / N as f64;
        let peak = dense_dft_argmax(&x) as f64 * resolution;
        assert!((peak - a).abs() <= resolution, "ω={omega} ω_s={omega_s}: alias {a}, dense peak {peak}");
    }
}

#[test]
fn half_sample_edge_rounds_up() {
    assert_eq!(nint(0.5), 1.0);
    assert_eq!(alias_frequency(2.0, 4.0), 2.0);
    assert_eq!(alias_frequency(6.0, 4.0), 2.0);
    assert_eq!(alias_frequency(4.0, 3.0), 1.0);
}

#[test]
fn cosine_peak_within_one_bin() {
    for (w0, dt) in [(0.884, 0.3), (2.5, 0.25), (4.0, 2.0 * PI / 20.0), (7.3, 0.1)] {
        let spec = dft_spectrum(&GreensSeries::from_fn(dt, N, RateTag::High, |t| (w0 * t).cos())).unwrap();
        assert!(spec.magnitudes.iter().all(|&m| m >= 0.0));
        assert!((strongest(&spec) - w0).abs() <= spec.resolution);
        assert!((spec.resolution - 2.0 * PI / (N as f64 * dt)).abs() < 1e-12);
    }
}

#[test]
fn constant_series_has_empty_spectrum() {
    let spec = dft_spectrum(&GreensSeries::from_fn(0.3, N, RateTag::High, |_| 0.7)).unwrap();
    assert!(spec.magnitudes.iter().all(|&m| m < 1e-12));
    assert_eq!(detect_omega2(&spec, 3.0, 0.9), Err(Error::Rerun));
    assert_eq!(detect_single(&spec), Err(Error::Rerun));
}

#[test]
fn flat_spectrum_is_rerun() {
    let spec = dft_spectrum(&GreensSeries::from_fn(0.3, N, RateTag::High, |t| t.cos())).unwrap();
    let flat = Spectrum { magnitudes: vec![1.0; spec.magnitudes.len()], ..spec };
    assert_eq!(detect_omega2(&flat, 3.0, 0.9), Err(Error::Rerun));
    assert_eq!(detect_omega1(&flat, 3.0, 4.0), Err(Error::Rerun));
}

#[test]
fn lehmann_signal_has_correct_peaks_and_ratio() {
    for (u, v) in [(2.0, 0.944), (3.0, 0.8), (1.5, 1.0)] {
        let poles = lehmann(u, v);
        assert_eq!(poles.len(), 2);
        let ((w1, a1), (w2, a2)) = (poles[0], poles[1]);
        let dt = 2.0 * PI / (5.0 * w2);
        let spec = dft_spectrum(&GreensSeries::from_fn(dt, N, RateTag::High, |t| lehmann_value(&poles, t))).unwrap();
        let hi = detect_omega2(&spec, w2, w1).unwrap();
        assert!((hi.omega - w2).abs() <= spec.resolution);
        let f = &spec.magnitudes;
        let lo = find_peaks(f).into_iter().filter(|&i| (spec.frequencies[i] - w1).abs() <= spec.resolution).max_by(|&a, &b| f[a].total_cmp(&f[b])).unwrap();
        let ratio = f[lo] / hi.magnitude;
        assert!((ratio / (a1 / a2) - 1.0).abs() < 0.1, "U={u}: ratio {ratio} vs {}", a1 / a2);
    }
}

proptest! {
    #[test]
    fn detection_is_scale_invariant(scale in 1e-3f64..1e3, u in 1.0f64..5.0, v in 0.3f64..1.0) {
        let poles = lehmann(u, v);
        let (w1, w2) = (poles[0].0, poles[1].0);
        let dt = 2.0 * PI / (5.0 * w2);
        let spec = dft_spectrum(&GreensSeries::from_fn(dt, N, RateTag::High, |t| lehmann_value(&poles, t))).unwrap();
        let scaled = Spectrum { magnitudes: spec.magnitudes.iter().map(|m| m * scale).collect(), ..spec.clone() };
        prop_assert_eq!(detect_omega2(&spec, w2, w1).map(|d| d.bin), detect_omega2(&scaled, w2, w1).map(|d| d.bin));
        let ws = 2.0 * PI / dt;
        prop_assert_eq!(detect_omega1(&spec, w2, ws).map(|d| d.bin), detect_omega1(&scaled, w2, ws).map(|d| d.bin));
    }
}

#[test]
fn omega1_absent_or_aliased_is_rerun() {
    let (w1, w2) = (0.884, 3.0);
    let plan = plan_rates(&PeakPair::expected(w1, w2), &RatePolicy::default()).unwrap();
    let only_w2 = dft_spectrum(&GreensSeries::from_fn(plan.dt_low, N, RateTag::Low, |t| (w2 * t).cos())).unwrap();
    assert_eq!(detect_omega1(&only_w2, w2, plan.omega_s_low()), Err(Error::Rerun));
    let silent = dft_spectrum(&GreensSeries::from_fn(plan.dt_low, N, RateTag::Low, |_| 1.0)).unwrap();
    assert_eq!(detect_omega1(&silent, w2, plan.omega_s_low()), Err(Error::Rerun));
    let both = dft_spectrum(&GreensSeries::from_fn(plan.dt_low, N, RateTag::Low, |t| 0.9 * (w1 * t).cos() + 0.1 * (w2 * t).cos())).unwrap();
    assert!((detect_omega1(&both, w2, plan.omega_s_low()).unwrap().omega - w1).abs() <= both.resolution);
}

#[test]
fn rate_policy_examples() {
    let policy = RatePolicy::default();
    let plan = plan_rates(&PeakPair::expected(0.884, 4.0), &policy).unwrap();
    assert!((plan.dt_high - 2.0 * PI / 20.0).abs() < 1e-15);
    assert!((plan.dt_high - 0.314).abs() < 1e-3);
    assert!((plan.dt_low - 1.421).abs() < 1e-3);
    let insulating = plan_rates(&PeakPair::expected(0.0, 4.0), &policy).unwrap();
    assert!((insulating.dt_low - 2.0 * PI / (insulating.mult_low * policy.min_omega1)).abs() < 1e-12);
    assert!(plan_rates(&PeakPair::expected(0.5, 0.0), &policy).is_err());
}

#[test]
fn low_rate_multiplier_separates_alias() {
    let policy = RatePolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let w1 = rng.random_range(0.05..1.0);
        let w2 = rng.random_range(1.5..6.0);
        let m = low_rate_multiplier(w1, w2, &policy);
        assert!((policy.min_multiplier..=policy.max_multiplier).contains(&m));
        let clear = (alias_frequency(w2, m * w1) / w1 - 1.0).abs() >= 0.5;
        assert!(clear || m == policy.multiplier);
    }
}

#[test]
fn series_invariants_and_validation() {
    let s = GreensSeries::from_fn(0.2, N, RateTag::Low, |t| t.sin());
    assert_eq!(s.len(), N);
    assert!(s.times.windows(2).all(|w| (w[1] - w[0] - 0.2).abs() < 1e-12));
    assert!(s.validate().is_ok());
    let mut bad = s.clone();
    bad.values.push(0.0);
    assert!(bad.validate().is_err());
    assert!(dft_spectrum(&GreensSeries::new(0.1, vec![1.0], RateTag::High)).is_err());
}

#[test]
fn exact_mode_series_matches_lehmann() {
    let (u, v) = (2.0, 0.944);
    let h = two_site_hamiltonian(u, v).unwrap();
    let sols = solve_many(&h, &CartanDecomposition::from_hamiltonian(&h).unwrap(), 5, 2, &SolveOptions::default()).unwrap();
    let theta = optimize_ansatz_angle(u, v).unwrap();
    let poles = lehmann(u, v);
    let s = measure_series(&sols, theta, 0.37, RateTag::High, &MeasureConfig::default(), 0).unwrap();
    assert_eq!(s.len(), N);
    assert!((s.values[0] - 1.0).abs() < 1e-12);
    for (t, g) in s.times.iter().zip(&s.values) {
        assert!((g - lehmann_value(&poles, *t)).abs() < 1e-8);
    }
    assert!(s.retention.iter().all(|&r| (r - 1.0).abs() < 1e-12));
}

#[test]
fn noiseless_detection_recovers_lehmann_poles() {
    let (u, v) = (2.0, 0.944);
    let h = two_site_hamiltonian(u, v).unwrap();
    let sols = solve_many(&h, &CartanDecomposition::from_hamiltonian(&h).unwrap(), 1, 1, &SolveOptions::default()).unwrap();
    let theta = optimize_ansatz_angle(u, v).unwrap();
    let poles = lehmann(u, v);
    let (w1, w2) = (poles[0].0, poles[1].0);
    let cfg = MeasureConfig::default();
    let plan = plan_rates(&PeakPair::expected(0.9, 3.0), &RatePolicy::default()).unwrap();
    let high = dft_spectrum(&measure_series(&sols, theta, plan.dt_high, RateTag::High, &cfg, 0).unwrap()).unwrap();
    let d2 = detect_omega2(&high, 3.0, 0.9).unwrap();
    assert!((d2.omega - w2).abs() <= high.resolution);
    let low = dft_spectrum(&measure_series(&sols, theta, plan.dt_low, RateTag::Low, &cfg, 0).unwrap()).unwrap();
    let d1 = detect_omega1(&low, d2.omega, plan.omega_s_low()).unwrap();
    assert!((d1.omega - w1).abs() <= low.resolution);
    assert!((d1.omega - 0.884).abs() <= low.resolution);
}
