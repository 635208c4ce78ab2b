//! Run configuration: TOML file, command-line overrides, validation and
//! the hash stamped into every output file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use khk_dmft::circuit::Connectivity;
use khk_dmft::dmft::DmftConfig;
use khk_dmft::sim::{NoiseModel, DEFAULT_CNOT_DEPOLARIZING};
use khk_dmft::spectral::{MeasureConfig, RatePolicy, DEFAULT_SAMPLES};
use khk_dmft::trotter::DEFAULT_F_CNOT;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: String,
    /// Interaction values of the phase-diagram sweep.
    pub u_list: Vec<f64>,
    pub v0: f64,
    /// Exact post-selected expectations instead of sampled shots.
    pub exact: bool,
    pub shots: u64,
    pub noise: f64,
    /// Per-qubit `[p(1|0), p(0|1)]`.
    pub readout_flip: Vec<[f64; 2]>,
    pub samples: usize,
    pub solutions: usize,
    /// `linear` or `all-to-all`.
    pub connectivity: String,
    pub tol: f64,
    pub max_iter: usize,
    pub max_reruns: usize,
    pub mixing: f64,
    pub rate_multiplier: f64,
    pub min_omega1: f64,
    pub eta: f64,
    pub f_cnot: f64,
    pub trotter_t: Vec<f64>,
    pub trotter_r_max: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            out_dir: "out".into(),
            u_list: vec![1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 8.0, 10.0],
            v0: 0.5,
            exact: false,
            shots: 8192,
            noise: DEFAULT_CNOT_DEPOLARIZING,
            readout_flip: Vec::new(),
            samples: DEFAULT_SAMPLES,
            solutions: 2,
            connectivity: "linear".into(),
            tol: 0.02,
            max_iter: 25,
            max_reruns: 3,
            mixing: 0.0,
            rate_multiplier: 5.0,
            min_omega1: 0.01,
            eta: 0.2,
            f_cnot: DEFAULT_F_CNOT,
            trotter_t: (1..=16).map(|k| 0.5 * k as f64).collect(),
            trotter_r_max: 64,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn validate(&self) -> Result<(), String> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let checks: [(bool, &str); 14] = [
            (self.v0 > 0.0, "v0 must be positive"),
            (self.shots >= 1, "shots must be at least 1"),
            (prob(self.noise), "noise must lie in [0, 1]"),
            (self.readout_flip.iter().all(|f| prob(f[0]) && prob(f[1])), "readout flips must lie in [0, 1]"),
            (self.samples >= 8, "samples must be at least 8"),
            (self.solutions >= 1, "solutions must be at least 1"),
            (self.connectivity == "linear" || self.connectivity == "all-to-all", "connectivity must be linear or all-to-all"),
            (self.tol > 0.0, "tol must be positive"),
            (self.max_iter >= 1, "max_iter must be at least 1"),
            ((0.0..1.0).contains(&self.mixing), "mixing must lie in [0, 1)"),
            ((3.0..=10.0).contains(&self.rate_multiplier), "rate_multiplier must lie in [3, 10]"),
            (self.min_omega1 > 0.0 && self.eta > 0.0, "min_omega1 and eta must be positive"),
            (prob(self.f_cnot), "f_cnot must lie in [0, 1]"),
            (!self.trotter_t.is_empty() && self.trotter_r_max >= 1, "trotter grids must be nonempty"),
        ];
        if let Some((_, msg)) = checks.iter().find(|c| !c.0) {
            return Err(msg.to_string());
        }
        if self.u_list.iter().any(|u| !(u.is_finite() && *u >= 0.0)) {
            return Err("u_list entries must be finite and nonnegative".into());
        }
        Ok(())
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel { cnot_depolarizing: self.noise, readout_flip: self.readout_flip.iter().map(|f| (f[0], f[1])).collect() }
    }

    pub fn measure(&self) -> MeasureConfig {
        MeasureConfig {
            samples: self.samples,
            shots: if self.exact { None } else { Some(self.shots) },
            noise: if self.exact { None } else { Some(self.noise_model()) },
            connectivity: if self.connectivity == "linear" { Connectivity::Linear } else { Connectivity::AllToAll },
            optimize: true,
        }
    }

    pub fn rates(&self) -> RatePolicy {
        RatePolicy { multiplier: self.rate_multiplier, min_omega1: self.min_omega1, ..RatePolicy::default() }
    }

    pub fn dmft(&self) -> DmftConfig {
        DmftConfig {
            v0: self.v0,
            tol: self.tol,
            max_iter: self.max_iter,
            solutions: self.solutions,
            seed: self.seed,
            max_reruns: self.max_reruns,
            mixing: self.mixing,
            measure: self.measure(),
            rates: self.rates(),
            ..DmftConfig::default()
        }
    }

    /// SHA-256 over the resolved configuration and the command, hex. The
    /// output directory is left out so relocated runs stay byte-identical.
    pub fn hash(&self, command: &str) -> String {
        let text = toml::to_string(&RunConfig { out_dir: String::new(), ..self.clone() }).expect("config serializes");
        let digest = Sha256::new().chain_update(text.as_bytes()).chain_update(command.as_bytes()).finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
