//! Run configuration: one JSON document plus a few override flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use virus_damage::dynamics::{InitialCondition, ModelParams, DEFAULT_STEP};
use virus_damage::experiments::{Family, InitPolicy, Interval, SweepSpec};
use virus_damage::graph::{generate_scale_free, generate_small_world, load_edge_list, Network};
use virus_damage::oracle::{Health, HostState};
use virus_damage::seed::{self, Stream};
use virus_damage::CostParams;

use crate::CliError;

fn default_step() -> f64 {
    DEFAULT_STEP
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random sub-stream derives from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub network: Option<NetworkConfig>,
    #[serde(default)]
    pub model: Option<ModelParams>,
    #[serde(default)]
    pub cost: Option<CostParams>,
    #[serde(default)]
    pub init: Option<InitPolicy>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub curve: Option<CurveConfig>,
    #[serde(default)]
    pub optimal_delay: Option<OptimalDelayConfig>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
}

/// A single network for `simulate`, `optimal-delay` and custom oracle checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NetworkConfig {
    ScaleFree { n: usize, edges: usize, exponent: f64, seed: Option<u64> },
    SmallWorld { n: usize, k: usize, rewire_prob: f64, seed: Option<u64> },
    File {
        path: PathBuf,
        #[serde(default)]
        directed: bool,
    },
    Path { n: usize },
    Star { n: usize },
    Empty { n: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    /// Model or cost parameter to sweep (`beta`, `gamma`, `theta`, `A`, `alpha`, `tau`).
    #[serde(default)]
    pub param: Option<String>,
    /// Network family to sweep instead of a parameter.
    #[serde(default)]
    pub family: Option<Family>,
    /// Explicit grid; otherwise `points` evenly spaced values over the parameter range.
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default)]
    pub points: Option<usize>,
}

fn default_coarse_points() -> usize {
    20
}

fn default_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimalDelayConfig {
    pub tau_range: Interval,
    #[serde(default = "default_coarse_points")]
    pub coarse_points: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_runs() -> usize {
    100_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum Fixture {
    /// Single isolated host.
    #[serde(rename = "single")]
    #[value(name = "single")]
    Single,
    #[serde(rename = "P2")]
    #[value(name = "P2")]
    P2,
    #[serde(rename = "P3")]
    #[value(name = "P3")]
    P3,
    #[serde(rename = "S4")]
    #[value(name = "S4")]
    S4,
}

impl Fixture {
    pub fn network(self) -> Network {
        match self {
            Fixture::Single => Network::empty(1),
            Fixture::P2 => Network::path(2),
            Fixture::P3 => Network::path(3),
            Fixture::S4 => Network::star(4),
        }
    }

    /// Parameter set shared by all fixtures.
    pub fn params() -> ModelParams {
        ModelParams { beta: 0.01, gamma: 0.2, theta: 0.1, tau: 5.0, horizon: 30.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Built-in fixture; when absent the top-level `network`, `model` and `init` are used.
    #[serde(default)]
    pub fixture: Option<Fixture>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Checkpoint times; defaults to every integer time in `[0, T]`.
    #[serde(default)]
    pub checkpoints: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn require<'a, T>(field: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        field.as_ref().ok_or_else(|| CliError::Config(format!("config section `{name}` is required")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(CliError::Config(format!("step must be positive, got {}", self.step)));
        }
        if let Some(model) = &self.model {
            model.validate().map_err(|e| CliError::Config(format!("model: {e}")))?;
        }
        if let Some(cost) = &self.cost {
            cost.validate().map_err(|e| CliError::Config(format!("cost: {e}")))?;
        }
        if let Some(sweep) = &self.sweep {
            sweep.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// The sweep section with the master seed and step injected.
    pub fn sweep_spec(&self) -> Result<SweepSpec, CliError> {
        let mut spec = Self::require(&self.sweep, "sweep")?.clone();
        spec.seed = self.seed;
        spec.step = self.step;
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn build_network(&self) -> Result<Network, CliError> {
        let default_seed = seed::derive(self.seed, Stream::Network, 0);
        let net = match Self::require(&self.network, "network")? {
            NetworkConfig::ScaleFree { n, edges, exponent, seed } => {
                generate_scale_free(*n, *edges, *exponent, seed.unwrap_or(default_seed))
            }
            NetworkConfig::SmallWorld { n, k, rewire_prob, seed } => {
                generate_small_world(*n, *k, *rewire_prob, seed.unwrap_or(default_seed))
            }
            NetworkConfig::File { path, directed } => {
                let file = std::fs::File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                load_edge_list(std::io::BufReader::new(file), *directed)
            }
            NetworkConfig::Path { n } | NetworkConfig::Star { n } | NetworkConfig::Empty { n } if *n == 0 => {
                return Err(CliError::Config("network needs at least one node".into()))
            }
            NetworkConfig::Path { n } => Ok(Network::path(*n)),
            NetworkConfig::Star { n } => Ok(Network::star(*n)),
            NetworkConfig::Empty { n } => Ok(Network::empty(*n)),
        };
        net.map_err(|e| CliError::Config(format!("network: {e}")))
    }

    pub fn initial_condition(&self, n: usize) -> Result<InitialCondition, CliError> {
        let policy = self.init.clone().unwrap_or(InitPolicy::RandomHost);
        policy
            .build(n, &mut seed::rng(self.seed, Stream::Init, 0))
            .map_err(|e| CliError::Config(format!("init: {e}")))
    }

    /// Discrete start for the stochastic oracle; only certain infections are representable.
    pub fn host_state(&self, n: usize) -> Result<HostState, CliError> {
        let init = self.initial_condition(n)?;
        let labels = init
            .values()
            .iter()
            .map(|&v| match v {
                0.0 => Ok(Health::Susceptible),
                1.0 => Ok(Health::Infected),
                _ => Err(CliError::Config("oracle needs a 0/1 initial condition".into())),
            })
            .collect::<Result<_, _>>()?;
        Ok(HostState::new(labels))
    }
}
