//! Subcommand bodies. Every file written carries the header line
//! `# config_hash=<hex> seed=<n>`.

use std::fmt;
use std::fs;
use std::path::PathBuf;

use khk_dmft::cartan::{solve_many, SolveOptions};
use khk_dmft::circuit::optimize_ansatz_angle;
use khk_dmft::dmft::{dmft_iterate, phase_csv, phase_diagram, two_site_poles, uniform_grid, DmftState, SelfEnergyModel, Termination};
use khk_dmft::lie::CartanDecomposition;
use khk_dmft::pauli::{two_site_hamiltonian, PauliSum};
use khk_dmft::spectral::{
    detect_omega1, detect_omega2, detect_single, dft_spectrum, measure_series, plan_rates, GreensSeries, PeakPair, RateTag, Spectrum,
};
use khk_dmft::dmft::quasiparticle_weight;
use khk_dmft::trotter::{fidelity_landscape, fit_coefficient, FitOptions, NormConvention};

use crate::config::RunConfig;
use crate::{Command, DecomposeArgs, DmftArgs, ModelArgs, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_DETECTION};

/// Coefficient the Trotter fit is compared against when picking a norm
/// convention.
const REFERENCE_COEFFICIENT: f64 = 0.152;

#[derive(Debug)]
pub enum CliError {
    Core(khk_dmft::Error),
    Io(String, std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{p}: {e}"),
        }
    }
}

impl From<khk_dmft::Error> for CliError {
    fn from(e: khk_dmft::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(khk_dmft::Error::Rerun) => EXIT_DETECTION,
            CliError::Core(khk_dmft::Error::InvalidParameters(_) | khk_dmft::Error::Parse(_)) => EXIT_CONFIG,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

struct Output {
    dir: PathBuf,
    header: String,
}

impl Output {
    fn new(cfg: &RunConfig, command: &Command) -> Result<Self> {
        let dir = PathBuf::from(&cfg.out_dir);
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(cfg.out_dir.clone(), e))?;
        let header = format!("# config_hash={} seed={}\n", cfg.hash(&format!("{command:?}")), cfg.seed);
        Ok(Output { dir, header })
    }

    fn write(&self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, format!("{}{}", self.header, body)).map_err(|e| CliError::Io(path.display().to_string(), e))
    }

    fn plot_stub(&self, name: &str, files: &[(&str, &str, &str)]) -> Result<()> {
        let mut s = String::from("import matplotlib.pyplot as plt\nimport pandas as pd\n\n");
        for (file, x, y) in files {
            s.push_str(&format!(
                "d = pd.read_csv(\"{file}\", comment=\"#\")\nplt.figure()\nplt.plot(d[\"{x}\"], d[\"{y}\"], \".-\")\nplt.xlabel(\"{x}\")\nplt.ylabel(\"{y}\")\nplt.title(\"{file}\")\n\n"
            ));
        }
        s.push_str("plt.show()\n");
        self.write(&format!("plot_{name}.py"), &s)
    }
}

pub fn run(command: &Command, cfg: &RunConfig) -> Result<u8> {
    let out = Output::new(cfg, command)?;
    match command {
        Command::Decompose(a) => decompose(a, cfg, &out),
        Command::Greens(a) => greens(a, cfg, &out),
        Command::Dmft(a) => dmft(a, cfg, &out),
        Command::PhaseDiagram(_) => phase(cfg, &out),
        Command::Trotter(a) => trotter(a, cfg, &out),
    }
}

fn decompose(a: &DecomposeArgs, cfg: &RunConfig, out: &Output) -> Result<u8> {
    let ham: PauliSum = match &a.hamiltonian {
        Some(s) => s.parse()?,
        None => two_site_hamiltonian(a.u, a.v)?,
    };
    let dec = CartanDecomposition::from_hamiltonian(&ham)?;
    let n = ham.n();
    let mut dims = String::from("algebra,dimension\n");
    for (name, b) in [("g", &dec.g), ("k", &dec.k), ("m", &dec.m), ("h", &dec.h), ("k0", &dec.k0), ("k1", &dec.k1)] {
        out.write(&format!("{name}.txt"), &b.dump())?;
        dims.push_str(&format!("{name},{}\n", b.len()));
    }
    let su = (1u64 << (2 * n)) - 1;
    dims.push_str(&format!("su,{su}\n"));
    out.write("dimensions.csv", &dims)?;
    println!("dim g = {} (su({}) has dimension {su})", dec.g.len(), 1u64 << n);
    println!("dim k = {}, dim m = {}, dim h = {}", dec.k.len(), dec.m.len(), dec.h.len());

    let sols = solve_many(&ham, &dec, cfg.seed, cfg.solutions, &SolveOptions::default())?;
    for (i, s) in sols.iter().enumerate() {
        out.write(&format!("solution_{i}.txt"), &s.to_text())?;
        println!("solution {i}: residual {:.3e}", s.residual);
    }
    Ok(0)
}

fn write_rate(out: &Output, tag: &str, series: &GreensSeries, spec: &Spectrum) -> Result<()> {
    out.write(&format!("greens_{tag}.csv"), &series.to_csv())?;
    out.write(&format!("spectrum_{tag}.csv"), &spec.to_csv())
}

fn greens(a: &ModelArgs, cfg: &RunConfig, out: &Output) -> Result<u8> {
    let ham = two_site_hamiltonian(a.u, a.v)?;
    let dec = CartanDecomposition::from_hamiltonian(&ham)?;
    let sols = solve_many(&ham, &dec, cfg.seed, cfg.solutions, &SolveOptions::default())?;
    let theta = optimize_ansatz_angle(a.u, a.v)?;
    let measure = cfg.measure();
    let rates = cfg.rates();
    let single = a.u == 0.0;
    let poles = two_site_poles(a.u, a.v)?;
    let prev = PeakPair::expected(poles.omega1, if single { poles.omega1 } else { poles.omega2 });

    let plan = plan_rates(&prev, &rates)?;
    let high = measure_series(&sols, theta, plan.dt_high, RateTag::High, &measure, cfg.seed)?;
    let spec_high = dft_spectrum(&high)?;
    write_rate(out, "high", &high, &spec_high)?;
    let d2 = if single { detect_single(&spec_high)? } else { detect_omega2(&spec_high, prev.omega2, prev.omega1)? };

    let (omega1, dt_low, amp1, retention_low) = if single {
        (d2.omega, plan.dt_low, 1.0, 1.0)
    } else {
        let plan_low = plan_rates(&PeakPair { omega2: d2.omega, ..prev }, &rates)?;
        let low = measure_series(&sols, theta, plan_low.dt_low, RateTag::Low, &measure, cfg.seed.wrapping_add(1))?;
        let spec_low = dft_spectrum(&low)?;
        write_rate(out, "low", &low, &spec_low)?;
        let d1 = detect_omega1(&spec_low, d2.omega, plan_low.omega_s_low())?;
        let ret = low.retention.iter().copied().fold(1.0, f64::min);
        (d1.omega, plan_low.dt_low, d1.magnitude / spec_low.max_magnitude(), ret)
    };
    let z = quasiparticle_weight(omega1, d2.omega, a.v)?;
    let retention = high.retention.iter().copied().fold(retention_low, f64::min);
    out.write(
        "peaks.csv",
        &format!(
            "omega1,omega2,Z,amp1_rel,amp2_rel,dt_high,dt_low,min_retention\n{omega1:.16e},{:.16e},{z:.16e},{amp1:.16e},{:.16e},{:.16e},{dt_low:.16e},{retention:.16e}\n",
            d2.omega,
            d2.magnitude / spec_high.max_magnitude(),
            plan.dt_high
        ),
    )?;
    out.plot_stub("greens", &[("greens_high.csv", "t", "iG"), ("spectrum_high.csv", "omega", "magnitude"), ("spectrum_low.csv", "omega", "magnitude")])?;
    println!("omega1 = {omega1:.6}, omega2 = {:.6}, Z = {z:.6}", d2.omega);
    Ok(0)
}

fn spectral_csv(state: &DmftState, eta: f64) -> Option<String> {
    let last = state.history.last()?;
    let model = SelfEnergyModel::from_frequencies(last.omega1, last.omega2, last.v).ok()?;
    let hi = 1.5 * last.omega2 + 2.0;
    let grid = uniform_grid(-hi, hi, 1201);
    let a = model.spectral_function(eta, &grid);
    let mut s = String::from("omega,A\n");
    for (w, v) in grid.iter().zip(a) {
        s.push_str(&format!("{w:.16e},{v:.16e}\n"));
    }
    Some(s)
}

fn state_code(s: &DmftState) -> u8 {
    match s.terminated {
        Termination::MaxIter => EXIT_CONVERGENCE,
        Termination::Tolerance | Termination::Omega1NotFound => 0,
    }
}

fn dmft(a: &DmftArgs, cfg: &RunConfig, out: &Output) -> Result<u8> {
    let state = dmft_iterate(a.u, &cfg.dmft())?;
    out.write("dmft_history.csv", &state.history_csv())?;
    if let Some(s) = spectral_csv(&state, cfg.eta) {
        out.write("spectral_function.csv", &s)?;
    }
    out.plot_stub("dmft", &[("dmft_history.csv", "iteration", "Z"), ("spectral_function.csv", "omega", "A")])?;
    println!(
        "U = {}: Z = {:.6}, V = {:.6}, {} iterations, {}",
        a.u,
        state.z_final,
        state.v,
        state.history.len(),
        state.terminated.name()
    );
    Ok(state_code(&state))
}

fn phase(cfg: &RunConfig, out: &Output) -> Result<u8> {
    let rows = phase_diagram(&cfg.u_list, &cfg.dmft());
    out.write("phase_diagram.csv", &phase_csv(&rows))?;
    let (mut other, mut detection, mut convergence) = (false, false, false);
    for r in &rows {
        match &r.outcome {
            Ok(s) => {
                out.write(&format!("dmft_history_U{}.csv", r.u), &s.history_csv())?;
                convergence |= state_code(s) == EXIT_CONVERGENCE;
                println!("U = {}: Z = {:.6} (exact {:.6}), {}", r.u, s.z_final, r.z_exact, s.terminated.name());
            }
            Err(e) => {
                detection |= *e == khk_dmft::Error::Rerun;
                other |= *e != khk_dmft::Error::Rerun;
                println!("U = {}: {e}", r.u);
            }
        }
    }
    out.plot_stub("phase_diagram", &[("phase_diagram.csv", "U", "Z_final")])?;
    Ok(if other {
        1
    } else if detection {
        EXIT_DETECTION
    } else if convergence {
        EXIT_CONVERGENCE
    } else {
        0
    })
}

fn trotter(a: &ModelArgs, cfg: &RunConfig, out: &Output) -> Result<u8> {
    let mut fits = Vec::new();
    for (name, norm) in [("unnormalized", NormConvention::Unnormalized), ("normalized", NormConvention::Normalized)] {
        let f = fit_coefficient(a.u, a.v, &FitOptions { norm, ..FitOptions::default() })?;
        fits.push((name, f));
    }
    let best = fits
        .iter()
        .min_by(|x, y| (x.1.coefficient - REFERENCE_COEFFICIENT).abs().total_cmp(&(y.1.coefficient - REFERENCE_COEFFICIENT).abs()))
        .copied()
        .unwrap();
    let mut s = String::from("convention,coefficient,points,selected\n");
    for (name, f) in &fits {
        s.push_str(&format!("{name},{:.16e},{},{}\n", f.coefficient, f.points, *name == best.0));
    }
    out.write("trotter_fit.csv", &s)?;

    let r_grid: Vec<usize> = (1..=cfg.trotter_r_max).collect();
    let land = fidelity_landscape(best.1.coefficient, &cfg.trotter_t, &r_grid, cfg.f_cnot)?;
    out.write("landscape.csv", &land.rows_csv())?;
    out.write("max_fidelity.csv", &land.curve_csv())?;
    out.write("cartan_band.csv", &format!("lower,upper\n{:.16e},{:.16e}\n", land.cartan_band.0, land.cartan_band.1))?;
    out.plot_stub("trotter", &[("max_fidelity.csv", "t", "F_max")])?;
    for (name, f) in &fits {
        println!("{name} fit coefficient {:.6} over {} points", f.coefficient, f.points);
    }
    println!("selected convention: {}", best.0);
    println!("Cartan reference band: [{:.4}, {:.4}]", land.cartan_band.0, land.cartan_band.1);
    Ok(0)
}
