//! Damage experiments: parameter sweeps, damage curves and the optimal delay.
//!
//! A sweep is a list of `samples` draws. Draw `d` fixes a parameter
//! combination (uniform on each range), a network instance and a seed host,
//! all taken from sub-streams of the master seed indexed by `d`. Every point
//! of a curve reuses the same draws with only the swept quantity changed, so
//! differences between grid points are not blurred by resampling noise.
//! Results are reduced in draw order and do not depend on the thread count.

use std::fmt;
use std::io::{self, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::damage::{antivirus_cost, CostParams, DamageError, DamageReport};
use crate::dynamics::{final_loss, DynamicsError, InitialCondition, ModelParams, DEFAULT_STEP};
use crate::export::fmt_f64;
use crate::graph::{generate_scale_free, generate_small_world, load_edge_list, GraphError, Network};
use crate::seed::{self, Stream};

/// Desk-scale number of draws per curve point.
pub const DEFAULT_SAMPLES: usize = 200;

/// Observation window used when none is given.
pub const DEFAULT_HORIZON: f64 = 50.0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid sweep specification: {0}")]
    InvalidSpec(String),
    #[error("unknown parameter {0:?} (expected beta, gamma, theta, A, alpha or tau)")]
    UnknownParameter(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("cannot read network {path}: {source}")]
    NetworkFile { path: PathBuf, source: GraphError },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Damage(#[from] DamageError),
}

/// Closed interval `[lo, hi]`; `lo == hi` pins the value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lo..=self.hi).contains(&x)
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        // Always consume one variate so pinning a range never shifts the stream.
        let u: f64 = rng.gen();
        if self.lo == self.hi {
            self.lo
        } else {
            self.lo + u * (self.hi - self.lo)
        }
    }

    /// `points` evenly spaced values from `lo` to `hi`.
    pub fn linspace(&self, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![self.lo],
            _ => (0..points)
                .map(|k| if k == points - 1 { self.hi } else { self.lo + self.width() * k as f64 / (points - 1) as f64 })
                .collect(),
        }
    }
}

/// Ranges the sweep draws each model and cost parameter from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRanges {
    pub beta: Interval,
    pub gamma: Interval,
    pub theta: Interval,
    pub a_coeff: Interval,
    pub alpha: Interval,
    pub tau: Interval,
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            beta: Interval::new(0.005, 0.016),
            gamma: Interval::new(0.1, 0.3),
            theta: Interval::new(0.1, 0.3),
            a_coeff: Interval::new(500.0, 600.0),
            alpha: Interval::new(1.0, 6.0),
            tau: Interval::new(1.0, 20.0),
        }
    }
}

/// Where the networks of a sweep come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NetworkSource {
    ScaleFree { n: usize, edges: usize, exponent: f64 },
    SmallWorld { n: usize, k: usize, rewire_prob: f64 },
    File {
        path: PathBuf,
        #[serde(default)]
        directed: bool,
    },
}

impl NetworkSource {
    /// The five 100-node, 109-edge scale-free settings.
    pub fn scale_free_suite() -> Vec<Self> {
        [2.7, 2.8, 2.9, 3.0, 3.1]
            .into_iter()
            .map(|exponent| NetworkSource::ScaleFree { n: 100, edges: 109, exponent })
            .collect()
    }

    /// The five 100-node, 200-edge small-world settings.
    pub fn small_world_suite() -> Vec<Self> {
        [0.1, 0.15, 0.2, 0.25, 0.3]
            .into_iter()
            .map(|rewire_prob| NetworkSource::SmallWorld { n: 100, k: 4, rewire_prob })
            .collect()
    }

    fn instantiate(&self, seed: u64) -> Result<Network, ExperimentError> {
        match self {
            NetworkSource::ScaleFree { n, edges, exponent } => Ok(generate_scale_free(*n, *edges, *exponent, seed)?),
            NetworkSource::SmallWorld { n, k, rewire_prob } => Ok(generate_small_world(*n, *k, *rewire_prob, seed)?),
            NetworkSource::File { path, directed } => {
                let file = std::fs::File::open(path)
                    .map_err(|e| ExperimentError::NetworkFile { path: path.clone(), source: e.into() })?;
                load_edge_list(io::BufReader::new(file), *directed)
                    .map_err(|source| ExperimentError::NetworkFile { path: path.clone(), source })
            }
        }
    }
}

/// How the infection starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitPolicy {
    /// One host, chosen uniformly per draw, infected with certainty.
    RandomHost,
    /// A fixed host infected with certainty.
    Host { node: usize },
    /// Every host infected with probability `p0`.
    Uniform { p0: f64 },
}

impl InitPolicy {
    /// Initial condition for `n` hosts; `rng` is consumed only by [`InitPolicy::RandomHost`].
    pub fn build<R: Rng>(&self, n: usize, rng: &mut R) -> Result<InitialCondition, ExperimentError> {
        match *self {
            InitPolicy::RandomHost => Ok(InitialCondition::single(n, rng.gen_range(0..n))),
            InitPolicy::Host { node } if node < n => Ok(InitialCondition::single(n, node)),
            InitPolicy::Host { node } => {
                Err(ExperimentError::InvalidSpec(format!("seed host {node} out of range for {n} nodes")))
            }
            InitPolicy::Uniform { p0 } => Ok(InitialCondition::uniform(n, p0)?),
        }
    }
}

fn default_step() -> f64 {
    DEFAULT_STEP
}

fn default_horizon() -> f64 {
    DEFAULT_HORIZON
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_networks() -> Vec<NetworkSource> {
    NetworkSource::small_world_suite()
}

fn default_init() -> InitPolicy {
    InitPolicy::RandomHost
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub ranges: ParamRanges,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_networks")]
    pub networks: Vec<NetworkSource>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Master seed. Not read from configuration files; drivers inject it.
    #[serde(default, skip_deserializing)]
    pub seed: u64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_init")]
    pub init: InitPolicy,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            ranges: ParamRanges::default(),
            horizon: DEFAULT_HORIZON,
            networks: default_networks(),
            samples: DEFAULT_SAMPLES,
            seed: 0,
            step: DEFAULT_STEP,
            init: InitPolicy::RandomHost,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::InvalidSpec(msg));
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad(format!("step must be positive, got {}", self.step));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.networks.is_empty() {
            return bad("at least one network source is required".into());
        }
        let r = &self.ranges;
        for (name, range) in [
            ("beta", r.beta),
            ("gamma", r.gamma),
            ("theta", r.theta),
            ("a_coeff", r.a_coeff),
            ("alpha", r.alpha),
            ("tau", r.tau),
        ] {
            if !(range.lo > 0.0 && range.lo <= range.hi && range.hi.is_finite()) {
                return bad(format!("{name} range [{}, {}] must satisfy 0 < lo <= hi", range.lo, range.hi));
            }
        }
        if !(r.tau.hi < self.horizon) {
            return bad(format!("tau range upper bound {} must be below the horizon {}", r.tau.hi, self.horizon));
        }
        if let InitPolicy::Uniform { p0 } = self.init {
            if !(0.0..=1.0).contains(&p0) {
                return bad(format!("uniform initial probability {p0} outside [0, 1]"));
            }
        }
        Ok(())
    }

    fn draw_params(&self, d: usize) -> (ModelParams, CostParams) {
        let mut rng = seed::rng(self.seed, Stream::Params, d as u64);
        let r = &self.ranges;
        let beta = r.beta.sample(&mut rng);
        let gamma = r.gamma.sample(&mut rng);
        let theta = r.theta.sample(&mut rng);
        let a_coeff = r.a_coeff.sample(&mut rng);
        let alpha = r.alpha.sample(&mut rng);
        let tau = r.tau.sample(&mut rng);
        (
            ModelParams { beta, gamma, theta, tau, horizon: self.horizon },
            CostParams { a_coeff, alpha },
        )
    }

    fn draw_init(&self, d: usize, n: usize) -> Result<InitialCondition, ExperimentError> {
        self.init.build(n, &mut seed::rng(self.seed, Stream::Init, d as u64))
    }
}

/// `k` independent parameter draws, reproducible from the master seed.
pub fn sample_params(spec: &SweepSpec, k: usize) -> Result<Vec<(ModelParams, CostParams)>, ExperimentError> {
    spec.validate()?;
    Ok((0..k).map(|d| spec.draw_params(d)).collect())
}

/// A parameter a marginal curve can sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "theta")]
    Theta,
    #[serde(rename = "A")]
    ACoeff,
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "tau")]
    Tau,
}

impl Param {
    pub const ALL: [Param; 6] = [Param::Beta, Param::Gamma, Param::Theta, Param::ACoeff, Param::Alpha, Param::Tau];

    pub fn name(self) -> &'static str {
        match self {
            Param::Beta => "beta",
            Param::Gamma => "gamma",
            Param::Theta => "theta",
            Param::ACoeff => "A",
            Param::Alpha => "alpha",
            Param::Tau => "tau",
        }
    }

    pub fn range(self, ranges: &ParamRanges) -> Interval {
        match self {
            Param::Beta => ranges.beta,
            Param::Gamma => ranges.gamma,
            Param::Theta => ranges.theta,
            Param::ACoeff => ranges.a_coeff,
            Param::Alpha => ranges.alpha,
            Param::Tau => ranges.tau,
        }
    }

    fn pin(self, model: &mut ModelParams, cost: &mut CostParams, value: f64) {
        match self {
            Param::Beta => model.beta = value,
            Param::Gamma => model.gamma = value,
            Param::Theta => model.theta = value,
            Param::ACoeff => cost.a_coeff = value,
            Param::Alpha => cost.alpha = value,
            Param::Tau => model.tau = value,
        }
    }

    /// Only the cost term depends on these.
    fn cost_only(self) -> bool {
        matches!(self, Param::ACoeff | Param::Alpha)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Param {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "beta" => Ok(Param::Beta),
            "gamma" => Ok(Param::Gamma),
            "theta" => Ok(Param::Theta),
            "A" | "a" | "a_coeff" => Ok(Param::ACoeff),
            "alpha" => Ok(Param::Alpha),
            "tau" => Ok(Param::Tau),
            other => Err(ExperimentError::UnknownParameter(other.to_string())),
        }
    }
}

/// Mean damage along a grid of one quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveResult {
    pub parameter: String,
    pub grid: Vec<f64>,
    pub mean_damage: Vec<f64>,
    pub mean_loss: Vec<f64>,
    pub mean_cost: Vec<f64>,
    pub samples: Vec<usize>,
    /// Sign of the Spearman rank correlation between grid and mean damage.
    pub spearman_sign: i8,
}

impl CurveResult {
    fn from_reports(parameter: String, grid: Vec<f64>, reports: &[Vec<DamageReport>]) -> Self {
        let mean = |f: fn(&DamageReport) -> f64| -> Vec<f64> {
            reports
                .iter()
                .map(|row| row.iter().map(f).sum::<f64>() / row.len() as f64)
                .collect()
        };
        let mean_damage = mean(|r| r.total);
        let spearman_sign = spearman_sign(&grid, &mean_damage);
        Self {
            parameter,
            mean_loss: mean(|r| r.economic_loss),
            mean_cost: mean(|r| r.antivirus_cost),
            samples: reports.iter().map(Vec::len).collect(),
            mean_damage,
            spearman_sign,
            grid,
        }
    }

    /// CSV with header `param_value,mean_damage,mean_loss,mean_cost,samples`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "param_value,mean_damage,mean_loss,mean_cost,samples")?;
        for k in 0..self.grid.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(self.grid[k]),
                fmt_f64(self.mean_damage[k]),
                fmt_f64(self.mean_loss[k]),
                fmt_f64(self.mean_cost[k]),
                self.samples[k]
            )?;
        }
        Ok(())
    }
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end) as f64 / 2.0 + 1.0;
        for &idx in &order[start..=end] {
            out[idx] = rank;
        }
        start = end + 1;
    }
    out
}

/// Spearman rank correlation; `None` when either series is constant or too short.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    if x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let mean = (x.len() as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean).powi(2);
        syy += (b - mean).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

pub fn spearman_sign(x: &[f64], y: &[f64]) -> i8 {
    match spearman(x, y) {
        Some(rho) if rho > 1e-12 => 1,
        Some(rho) if rho < -1e-12 => -1,
        _ => 0,
    }
}

fn check_grid(grid: &[f64], valid: impl Fn(f64) -> bool, what: &str) -> Result<(), ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::InvalidGrid("grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(ExperimentError::InvalidGrid("grid must be strictly increasing".into()));
    }
    if let Some(bad) = grid.iter().find(|&&g| !valid(g)) {
        return Err(ExperimentError::InvalidGrid(format!("{bad} is not a valid {what}")));
    }
    Ok(())
}

struct Draw {
    model: ModelParams,
    cost: CostParams,
    network: Arc<Network>,
    init: InitialCondition,
}

/// Materializes every draw of a sweep: parameters, network instance and seed host.
fn prepare_draws(spec: &SweepSpec) -> Result<Vec<Draw>, ExperimentError> {
    spec.validate()?;
    // File sources are read once and shared by every draw.
    let loaded: Vec<Option<Arc<Network>>> = spec
        .networks
        .iter()
        .map(|src| match src {
            NetworkSource::File { .. } => src.instantiate(0).map(|n| Some(Arc::new(n))),
            _ => Ok(None),
        })
        .collect::<Result<_, _>>()?;

    (0..spec.samples)
        .into_par_iter()
        .map(|d| {
            let (model, cost) = spec.draw_params(d);
            let which = if spec.networks.len() == 1 {
                0
            } else {
                seed::rng(spec.seed, Stream::Source, d as u64).gen_range(0..spec.networks.len())
            };
            let network = match &loaded[which] {
                Some(net) => Arc::clone(net),
                None => Arc::new(spec.networks[which].instantiate(seed::derive(spec.seed, Stream::Network, d as u64))?),
            };
            let init = spec.draw_init(d, network.node_count())?;
            Ok(Draw { model, cost, network, init })
        })
        .collect()
}

fn evaluate(net: &Network, model: &ModelParams, cost: &CostParams, init: &InitialCondition, step: f64) -> Result<DamageReport, ExperimentError> {
    let loss = final_loss(net, model, init, step)?;
    Ok(DamageReport::new(loss, antivirus_cost(cost, model.tau)?))
}

/// Mean damage with `which` pinned to each grid value and everything else drawn per the spec.
pub fn marginal_curve(spec: &SweepSpec, which: Param, grid: &[f64]) -> Result<CurveResult, ExperimentError> {
    let horizon = spec.horizon;
    match which {
        Param::Tau => check_grid(grid, |g| g > 0.0 && g < horizon, "delay (0 < tau < horizon)")?,
        _ => check_grid(grid, |g| g > 0.0 && g.is_finite(), "positive parameter value")?,
    }
    let draws = prepare_draws(spec)?;

    // Loss does not depend on cost parameters, so integrate each draw once.
    let shared_loss: Option<Vec<f64>> = if which.cost_only() {
        Some(
            draws
                .par_iter()
                .map(|d| final_loss(&d.network, &d.model, &d.init, spec.step))
                .collect::<Result<_, _>>()?,
        )
    } else {
        None
    };

    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..draws.len()).map(move |d| (g, d))).collect();
    let flat: Vec<DamageReport> = jobs
        .par_iter()
        .map(|&(g, d)| {
            let draw = &draws[d];
            let (mut model, mut cost) = (draw.model, draw.cost);
            which.pin(&mut model, &mut cost, grid[g]);
            match &shared_loss {
                Some(loss) => Ok(DamageReport::new(loss[d], antivirus_cost(&cost, model.tau)?)),
                None => evaluate(&draw.network, &model, &cost, &draw.init, spec.step),
            }
        })
        .collect::<Result<_, ExperimentError>>()?;
    let reports: Vec<Vec<DamageReport>> = flat.chunks(draws.len()).map(<[_]>::to_vec).collect();
    Ok(CurveResult::from_reports(which.name().to_string(), grid.to_vec(), &reports))
}

/// Network family swept by [`structure_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Family {
    /// Grid values are power-law exponents.
    ScaleFree { n: usize, edges: usize },
    /// Grid values are rewiring probabilities.
    SmallWorld { n: usize, k: usize },
}

impl Family {
    pub fn parameter_name(&self) -> &'static str {
        match self {
            Family::ScaleFree { .. } => "exponent",
            Family::SmallWorld { .. } => "rewire_prob",
        }
    }

    fn source(&self, value: f64) -> NetworkSource {
        match *self {
            Family::ScaleFree { n, edges } => NetworkSource::ScaleFree { n, edges, exponent: value },
            Family::SmallWorld { n, k } => NetworkSource::SmallWorld { n, k, rewire_prob: value },
        }
    }
}

/// Mean damage per family parameter; each draw gets its own network instance.
pub fn structure_curve(spec: &SweepSpec, family: Family, grid: &[f64]) -> Result<CurveResult, ExperimentError> {
    spec.validate()?;
    match family {
        Family::ScaleFree { .. } => check_grid(grid, |g| g > 2.0 && g.is_finite(), "power exponent (> 2)")?,
        Family::SmallWorld { .. } => check_grid(grid, |g| (0.0..=1.0).contains(&g), "rewiring probability")?,
    }
    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..spec.samples).map(move |d| (g, d))).collect();
    let flat: Vec<DamageReport> = jobs
        .par_iter()
        .map(|&(g, d)| {
            let net = family.source(grid[g]).instantiate(seed::derive(spec.seed, Stream::Network, d as u64))?;
            let (model, cost) = spec.draw_params(d);
            let init = spec.draw_init(d, net.node_count())?;
            evaluate(&net, &model, &cost, &init, spec.step)
        })
        .collect::<Result<_, ExperimentError>>()?;
    let reports: Vec<Vec<DamageReport>> = flat.chunks(spec.samples).map(<[_]>::to_vec).collect();
    Ok(CurveResult::from_reports(family.parameter_name().to_string(), grid.to_vec(), &reports))
}

/// Which end of the delay range holds the coarse minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalDelay {
    pub tau_star: f64,
    pub damage_star: DamageReport,
    /// Set when the minimum sits at a range endpoint; no refinement is done then.
    pub boundary: Option<Boundary>,
    /// Coarse scan `(tau, damage)`.
    pub curve: Vec<(f64, DamageReport)>,
    pub evaluations: usize,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of `f` on `[a, b]`, stopping once the
/// bracket is no wider than `tol`. Returns the best evaluated point and the
/// number of evaluations.
pub fn golden_section<E>(mut f: impl FnMut(f64) -> Result<f64, E>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64, usize), E> {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut evals = 2;
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
        evals += 1;
    }
    Ok(if f1 <= f2 { (x1, f1, evals) } else { (x2, f2, evals) })
}

/// Delay minimizing the overall damage on `tau_range`.
///
/// Damage is scanned on `coarse_points` evenly spaced delays; the bracket
/// around the best one is then refined by golden-section search to width `tol`.
/// `model.tau` is ignored.
#[allow(clippy::too_many_arguments)]
pub fn find_optimal_delay(
    net: &Network,
    model: &ModelParams,
    cost: &CostParams,
    init: &InitialCondition,
    tau_range: Interval,
    coarse_points: usize,
    tol: f64,
    step: f64,
) -> Result<OptimalDelay, ExperimentError> {
    if !(tau_range.lo > 0.0 && tau_range.lo < tau_range.hi && tau_range.hi < model.horizon) {
        return Err(ExperimentError::InvalidSpec(format!(
            "delay range [{}, {}] must lie inside (0, {})",
            tau_range.lo, tau_range.hi, model.horizon
        )));
    }
    if coarse_points < 5 {
        return Err(ExperimentError::InvalidSpec(format!("need at least 5 coarse points, got {coarse_points}")));
    }
    if !(tol > 0.0) {
        return Err(ExperimentError::InvalidSpec(format!("tolerance must be positive, got {tol}")));
    }
    cost.validate()?;

    let damage_at = |tau: f64| evaluate(net, &model.with_tau(tau), cost, init, step);
    let curve: Vec<(f64, DamageReport)> = tau_range
        .linspace(coarse_points)
        .into_par_iter()
        .map(|tau| damage_at(tau).map(|r| (tau, r)))
        .collect::<Result<_, _>>()?;

    let best = (0..curve.len())
        .reduce(|best, k| if curve[k].1.total < curve[best].1.total { k } else { best })
        .expect("at least five points");
    let boundary = match best {
        0 => Some(Boundary::Lower),
        k if k == curve.len() - 1 => Some(Boundary::Upper),
        _ => None,
    };
    if boundary.is_some() {
        let (tau_star, damage_star) = curve[best];
        return Ok(OptimalDelay { tau_star, damage_star, boundary, curve, evaluations: coarse_points });
    }

    let (tau_star, _, evals) = golden_section(|tau| damage_at(tau).map(|r| r.total), curve[best - 1].0, curve[best + 1].0, tol)?;
    let refined = damage_at(tau_star)?;
    let (tau_star, damage_star) = if refined.total <= curve[best].1.total { (tau_star, refined) } else { curve[best] };
    Ok(OptimalDelay { tau_star, damage_star, boundary: None, curve, evaluations: coarse_points + evals + 1 })
}
