mod common;

use common::*;
use khk_dmft::dmft::*;
use khk_dmft::Error;
use num_complex::Complex64;
use proptest::prelude::*;

/// Fixed point of `V ← √Z` on the closed-form poles.
fn exact_fixed_point(u: f64) -> f64 {
    let mut v: f64 = 0.5;
    for _ in 0..2000 {
        if v < 1e-6 {
            return 0.0;
        }
        let m = two_site_poles(u, v).unwrap();
        v = quasiparticle_weight(m.omega1, m.omega2, v).unwrap().min(1.0).sqrt();
    }
    v * v
}

#[test]
fn closed_form_poles_match_lehmann() {
    for (u, v) in [(1.0, 0.5), (2.0, 0.944), (4.0, 1.0), (8.0, 0.116), (5.5, 0.3)] {
        let m = two_site_poles(u, v).unwrap();
        let poles = lehmann(u, v);
        assert!((m.omega1 - poles[0].0).abs() < 1e-10 && (m.omega2 - poles[1].0).abs() < 1e-10);
        // Pole weights from the sum rule and regularity equal the residues.
        assert!((m.alpha1 - poles[0].1).abs() < 1e-8, "U={u}: {} vs {}", m.alpha1, poles[0].1);
        assert!((m.alpha2 - poles[1].1).abs() < 1e-8);
    }
}

#[test]
fn self_consistent_weight_is_the_transition_curve() {
    for u in [1.0, 2.0, 3.0, 4.0, 5.0] {
        let z = exact_fixed_point(u);
        assert!((z - z_exact(u)).abs() < 1e-9, "U={u}: {z}");
    }
    for u in [7.0, 8.0, 10.0] {
        assert!(exact_fixed_point(u) <= 0.05);
    }
}

proptest! {
    #[test]
    fn amplitudes_obey_sum_rule_and_regularity(u in 0.2f64..9.0, v in 0.05f64..1.2) {
        let m = two_site_poles(u, v).unwrap();
        prop_assert!((m.alpha1 + m.alpha2 - 0.5).abs() < 1e-12);
        let reg = m.alpha1 / m.omega1.powi(2) + m.alpha2 / m.omega2.powi(2);
        prop_assert!((reg * 2.0 * v * v - 1.0).abs() < 1e-9);
        prop_assert!(m.alpha1 >= 0.0 && m.alpha2 >= 0.0);
    }

    #[test]
    fn self_energy_slope_gives_the_weight(u in 0.5f64..9.0, v in 0.1f64..1.2) {
        let m = two_site_poles(u, v).unwrap();
        let z = quasiparticle_weight(m.omega1, m.omega2, v).unwrap();
        let h = 1e-4;
        let slope = (m.self_energy(h) - m.self_energy(-h)) / (2.0 * h);
        prop_assert!((slope - (1.0 - 1.0 / z)).abs() < 1e-6 * (1.0 + 1.0 / z), "slope {} vs {}", slope, 1.0 - 1.0 / z);
    }

    #[test]
    fn dyson_form_matches_green_functions(u in 0.5f64..9.0, v in 0.1f64..1.2, w in 0.05f64..6.0) {
        let m = two_site_poles(u, v).unwrap();
        let z = Complex64::new(w, 0.0);
        let direct = (1.0 / m.green0(z) - 1.0 / m.green(z)).re;
        prop_assume!(direct.is_finite() && direct.abs() < 1e6);
        prop_assert!((m.self_energy(w) - direct).abs() < 1e-8 * (1.0 + direct.abs()));
    }
}

#[test]
fn spectral_function_integrates_to_one() {
    for (u, v) in [(2.0, 0.944), (4.0, 0.73), (8.0, 0.06)] {
        let m = two_site_poles(u, v).unwrap();
        let grid = uniform_grid(-200.0, 200.0, 400_001);
        let a = m.spectral_function(0.05, &grid);
        assert!(a.iter().all(|&x| x >= 0.0));
        let dx = grid[1] - grid[0];
        let total: f64 = a.windows(2).map(|p| 0.5 * (p[0] + p[1]) * dx).sum();
        assert!((total - 1.0).abs() < 0.01, "U={u}: ∫A = {total}");
    }
}

#[test]
fn weight_edge_cases() {
    assert_eq!(quasiparticle_weight(0.0, 4.0, 0.2).unwrap(), 0.0);
    assert!((quasiparticle_weight(0.7, 0.7, 0.7).unwrap() - 1.0).abs() < 1e-15);
    assert!(quasiparticle_weight(1.0, 2.0, 0.0).is_err());
    assert!(matches!(quasiparticle_weight(0.1, 0.1, 1.0), Err(Error::InvalidGeometry(_))));
    assert_eq!(amplitudes(0.5, 0.5, 0.4), Err(Error::DegeneratePoles));
    assert!(two_site_poles(2.0, 0.0).is_err());
    assert_eq!(z_exact(0.0), 1.0);
    assert_eq!(z_exact(6.0), 0.0);
}

#[test]
fn loop_rejects_bad_parameters() {
    let bad_v0 = DmftConfig { v0: 0.0, ..Default::default() };
    assert!(matches!(dmft_iterate(2.0, &bad_v0), Err(Error::InvalidParameters(_))));
    assert!(matches!(dmft_iterate(-1.0, &DmftConfig::default()), Err(Error::InvalidParameters(_))));
    let no_solutions = DmftConfig { solutions: 0, ..Default::default() };
    assert!(dmft_iterate(2.0, &no_solutions).is_err());
}

#[test]
fn noninteracting_loop_has_unit_weight() {
    let st = dmft_iterate(0.0, &DmftConfig::default()).unwrap();
    assert!(st.converged);
    assert!((st.z_final - 1.0).abs() < 1e-9);
    assert!((st.v - 1.0).abs() < 1e-6);
}

#[test]
fn noiseless_loop_at_u2_records_history() {
    let st = dmft_iterate(2.0, &DmftConfig { solutions: 1, ..Default::default() }).unwrap();
    assert_eq!(st.terminated, Termination::Tolerance);
    assert!(st.history.len() >= 2);
    assert!(st.history.iter().all(|r| !r.flagged && r.min_retention > 1.0 - 1e-12));
    assert!((0.923..=0.963).contains(&st.v));
    let csv = st.history_csv();
    assert_eq!(csv.lines().count(), st.history.len() + 1);
    assert!(csv.starts_with("iteration,V,omega1,omega2,Z"));
}

#[test]
fn iteration_cap_ends_the_loop() {
    let st = dmft_iterate(3.0, &DmftConfig { max_iter: 1, solutions: 1, ..Default::default() }).unwrap();
    assert_eq!(st.terminated, Termination::MaxIter);
    assert!(!st.converged);
    assert_eq!(st.history.len(), 1);
    assert_eq!(st.terminated.name(), "max_iter");
}

#[test]
fn phase_rows_keep_failures() {
    let rows = phase_diagram(&[0.0, 0.5], &DmftConfig { solutions: 1, ..Default::default() });
    assert!((rows[0].z_final().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(rows[1].outcome, Err(Error::Rerun));
    let csv = phase_csv(&rows);
    assert!(csv.lines().nth(2).unwrap().contains("NaN"));
}
