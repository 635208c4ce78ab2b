//! `khk-dmft`: decomposition, Green's functions, the DMFT loop, the
//! phase diagram and the Trotter comparison, all emitted as files.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "khk-dmft", version, about = "Cartan fast-forwarded two-site DMFT on a simulated device")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// CNOT depolarizing probability.
    #[arg(long, global = true)]
    noise: Option<f64>,
    #[arg(long, global = true)]
    shots: Option<u64>,
    /// Exact noiseless expectations instead of sampled shots.
    #[arg(long, global = true)]
    exact: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Lie closure, Cartan split and KHK solutions of a Hamiltonian.
    Decompose(DecomposeArgs),
    /// Two-rate Green's function series, spectra and detected peaks.
    Greens(ModelArgs),
    /// Self-consistency loop at one interaction strength.
    Dmft(DmftArgs),
    /// DMFT over the configured list of interaction strengths.
    PhaseDiagram(PhaseArgs),
    /// Trotter error fit and fidelity landscape.
    Trotter(ModelArgs),
}

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[arg(long, default_value_t = 2.0)]
    pub u: f64,
    #[arg(long, default_value_t = 0.944)]
    pub v: f64,
    /// Pauli sum such as `0.5*XXII + 1.0*ZIZI`; replaces the two-site model.
    #[arg(long)]
    pub hamiltonian: Option<String>,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 2.0)]
    pub u: f64,
    #[arg(long, default_value_t = 0.944)]
    pub v: f64,
}

#[derive(Args, Debug)]
pub struct DmftArgs {
    #[arg(long)]
    pub u: f64,
}

#[derive(Args, Debug)]
pub struct PhaseArgs {
    /// Comma-separated interaction strengths; replaces `u_list`.
    #[arg(long, value_delimiter = ',')]
    pub u: Option<Vec<f64>>,
}

pub const EXIT_CONVERGENCE: u8 = 2;
pub const EXIT_DETECTION: u8 = 3;
pub const EXIT_CONFIG: u8 = 4;

fn resolve(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.to_string_lossy().into_owned();
    }
    if let Some(n) = cli.noise {
        cfg.noise = n;
    }
    if let Some(s) = cli.shots {
        cfg.shots = s;
    }
    if cli.exact {
        cfg.exact = true;
    }
    if let Command::PhaseDiagram(PhaseArgs { u: Some(us) }) = &cli.command {
        cfg.u_list = us.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("config error: --jobs must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match commands::run(&cli.command, &cfg) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
