use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_khk-dmft")).args(args).output().expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_row(text: &str) -> Vec<f64> {
    text.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect()
}

#[test]
fn decompose_reports_dimension_24() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["decompose", "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("dim g = 24"));
    let g = read(d.path(), "g.txt");
    assert!(g.starts_with("# config_hash="));
    assert_eq!(g.lines().count(), 2 + 24);
    assert!(read(d.path(), "solution_1.txt").contains("eta "));
}

#[test]
fn decompose_single_z_has_dimension_one() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["decompose", "--hamiltonian", "1.0*Z", "--out", d.path().to_str().unwrap()]);
    assert!(stdout(&o).contains("dim g = 1"), "{}", stdout(&o));
}

#[test]
fn greens_noiseless_recovers_quasiparticle_pole() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["greens", "--exact", "--u", "2", "--v", "0.944", "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let peaks = csv_row(&read(d.path(), "peaks.csv"));
    assert!((peaks[0] - 0.884).abs() < 0.01, "omega1 {}", peaks[0]);
    assert_eq!(peaks[7], 1.0);
    let first = csv_row(&read(d.path(), "greens_high.csv"));
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 1.0).abs() < 1e-12);
    assert!(d.path().join("plot_greens.py").exists());
}

#[test]
fn identical_config_and_seed_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |dir: &Path, jobs: &str| {
        let o = run(&["greens", "--shots", "512", "--seed", "7", "--jobs", jobs, "--out", dir.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    };
    args(a.path(), "1");
    args(b.path(), "3");
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 6);
    for n in names {
        let n = n.to_str().unwrap();
        assert_eq!(read(a.path(), n), read(b.path(), n), "{n}");
    }
}

#[test]
fn header_tracks_seed_and_config() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&["decompose", "--seed", "3", "--out", a.path().to_str().unwrap()]);
    run(&["decompose", "--seed", "4", "--out", b.path().to_str().unwrap()]);
    let ha = read(a.path(), "k.txt").lines().next().unwrap().to_string();
    let hb = read(b.path(), "k.txt").lines().next().unwrap().to_string();
    assert!(ha.ends_with("seed=3") && hb.ends_with("seed=4"));
    assert_ne!(ha.split_whitespace().nth(1), hb.split_whitespace().nth(1));
}

#[test]
fn config_file_is_read_and_unknown_keys_rejected() {
    let d = tempfile::tempdir().unwrap();
    let good = d.path().join("good.toml");
    fs::write(&good, format!("exact = true\nseed = 5\nout_dir = \"{}\"\n", d.path().join("o").display())).unwrap();
    let o = run(&["dmft", "--u", "0", "--config", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let hist = read(&d.path().join("o"), "dmft_history.csv");
    assert!(hist.lines().next().unwrap().ends_with("seed=5"));

    let bad = d.path().join("bad.toml");
    fs::write(&bad, "shotz = 10\n").unwrap();
    assert_eq!(run(&["dmft", "--u", "1", "--config", bad.to_str().unwrap()]).status.code(), Some(4));
}

#[test]
fn invalid_values_are_config_errors() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    assert_eq!(run(&["greens", "--shots", "0", "--out", out]).status.code(), Some(4));
    assert_eq!(run(&["greens", "--noise", "1.5", "--out", out]).status.code(), Some(4));
    assert_eq!(run(&["greens", "--v", "-1", "--exact", "--out", out]).status.code(), Some(4));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(4));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn dmft_noninteracting_gives_unit_weight() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["dmft", "--u", "0", "--exact", "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Z = 1.000000"), "{}", stdout(&o));
}

#[test]
fn detection_failure_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["dmft", "--u", "0.5", "--exact", "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
}

#[test]
fn convergence_failure_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.toml");
    fs::write(&cfg, "exact = true\nmax_iter = 1\n").unwrap();
    let o = run(&["dmft", "--u", "2", "--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
}

#[test]
fn phase_diagram_writes_table() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["phase-diagram", "--exact", "--u", "0,2,10", "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let table = read(d.path(), "phase_diagram.csv");
    let rows: Vec<Vec<&str>> = table.lines().skip(2).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 1.0);
    assert!((rows[1][1].parse::<f64>().unwrap() - 8.0 / 9.0).abs() < 0.04);
    assert!(rows[2][1].parse::<f64>().unwrap() <= 0.05);
    assert!(d.path().join("dmft_history_U2.csv").exists());
}

#[test]
fn trotter_reports_fit_and_band() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["trotter", "--u", "2", "--v", "0.94", "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let fit = read(d.path(), "trotter_fit.csv");
    let sel: Vec<&str> = fit.lines().find(|l| l.ends_with(",true")).unwrap().split(',').collect();
    assert_eq!(sel[0], "unnormalized");
    assert!((sel[1].parse::<f64>().unwrap() - 0.152).abs() <= 0.0152);
    let band = csv_row(&read(d.path(), "cartan_band.csv"));
    assert!((band[1] - 0.543).abs() < 0.001);
}

#[test]
fn trotter_with_perfect_gates_is_pure_trotter_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("c.toml");
    fs::write(&cfg, "f_cnot = 1.0\ntrotter_t = [1.0]\ntrotter_r_max = 8\n").unwrap();
    let o = run(&["trotter", "--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let land = read(d.path(), "landscape.csv");
    for l in land.lines().skip(2) {
        let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[3], 1.0);
        assert_eq!(f[2], f[4]);
    }
    let band = csv_row(&read(d.path(), "cartan_band.csv"));
    assert_eq!(band[1], 1.0);
}
