//! Exact stochastic ground truth for the delayed SIR process.
//!
//! The mean-field ODE in [`crate::dynamics`] treats host states as
//! independent. Here the underlying continuous-time Markov chain is handled
//! exactly, either by sampling paths (Gillespie direct method) or, for tiny
//! networks, by integrating the forward equations over all `3^N` joint states.
//!
//! Rates: a susceptible host with `m` infected in-neighbours is infected at
//! rate `beta * m`. From `tau` on, infected hosts recover at rate `gamma` and
//! susceptible hosts are vaccinated at rate `theta`.

use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{InitialCondition, ModelParams, ParamsError, Trajectory};
use crate::export::{write_state_csv, Block};
use crate::graph::Network;
use crate::seed::{self, Stream};

/// Largest network the master equation accepts.
pub const MAX_MASTER_NODES: usize = 10;

/// Default (and maximum) RK4 step for the master equation.
pub const MASTER_STEP: f64 = 0.005;

const RUNS_PER_CHUNK: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("master equation needs N <= {MAX_MASTER_NODES} (3^N states), got N = {0}")]
    TooManyNodes(usize),
    #[error("host state has {got} entries, network has {expected} nodes")]
    SizeMismatch { expected: usize, got: usize },
    #[error("time grid must be nondecreasing inside [0, horizon]: {0}")]
    InvalidGrid(String),
    #[error("at least one run is required")]
    NoRuns,
    #[error("master-equation step must be in (0, {MASTER_STEP}], got {0}")]
    InvalidStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Health {
    Susceptible = 0,
    Infected = 1,
    Recovered = 2,
}

/// Joint state of every host.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostState(Vec<Health>);

impl HostState {
    pub fn new(labels: Vec<Health>) -> Self {
        Self(labels)
    }

    pub fn uniform(n: usize, label: Health) -> Self {
        Self(vec![label; n])
    }

    /// Host `node` infected, the rest susceptible.
    pub fn single_infected(n: usize, node: usize) -> Self {
        let mut labels = vec![Health::Susceptible; n];
        labels[node] = Health::Infected;
        Self(labels)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> &[Health] {
        &self.0
    }

    /// The matching ODE start, if no host is recovered (the ODE starts with `R = 0`).
    pub fn to_initial_condition(&self) -> Option<InitialCondition> {
        if self.0.contains(&Health::Recovered) {
            return None;
        }
        let i0 = self.0.iter().map(|&h| if h == Health::Infected { 1.0 } else { 0.0 }).collect();
        InitialCondition::new(i0).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub node: usize,
    pub to: Health,
}

/// One realization of the process on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub events: Vec<Event>,
    /// Total host-time spent infected in `[0, T]`.
    pub loss: f64,
}

fn check_inputs(net: &Network, p: &ModelParams, init: &HostState) -> Result<(), OracleError> {
    p.validate()?;
    if init.len() != net.node_count() {
        return Err(OracleError::SizeMismatch { expected: net.node_count(), got: init.len() });
    }
    Ok(())
}

fn check_grid(grid: &[f64], horizon: f64) -> Result<(), OracleError> {
    if grid.is_empty() {
        return Err(OracleError::InvalidGrid("empty".into()));
    }
    if grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(OracleError::InvalidGrid("not sorted".into()));
    }
    if !(grid[0] >= 0.0) || !(grid[grid.len() - 1] <= horizon) {
        return Err(OracleError::InvalidGrid(format!("points outside [0, {horizon}]")));
    }
    Ok(())
}

/// Samples one path with the direct method.
///
/// If the next event would fall past `tau`, the clock is stopped at `tau` and
/// redrawn with the post-release rates; exponential clocks are memoryless, so
/// this is exact.
pub fn gillespie_run(net: &Network, p: &ModelParams, init: &HostState, seed: u64) -> Result<SamplePath, OracleError> {
    check_inputs(net, p, init)?;
    Ok(sample_path(net, p, init, &mut seed::rng_from(seed)))
}

fn sample_path<R: Rng>(net: &Network, p: &ModelParams, init: &HostState, rng: &mut R) -> SamplePath {
    let n = net.node_count();
    let mut state = init.0.clone();
    let mut pressure = vec![0u32; n];
    let mut infected = 0usize;
    for j in 0..n {
        if state[j] == Health::Infected {
            infected += 1;
            for &i in net.out_neighbors(j) {
                pressure[i] += 1;
            }
        }
    }

    let mut events = Vec::new();
    let mut loss = 0.0;
    let mut t = 0.0;
    let mut released = false;
    loop {
        let (vaccination, recovery) = if released { (p.theta, p.gamma) } else { (0.0, 0.0) };
        let total: f64 = state
            .iter()
            .zip(&pressure)
            .map(|(&h, &m)| match h {
                Health::Susceptible => p.beta * f64::from(m) + vaccination,
                Health::Infected => recovery,
                Health::Recovered => 0.0,
            })
            .sum();
        let phase_end = if released { p.horizon } else { p.tau };
        let wait = if total > 0.0 { -(1.0 - rng.gen::<f64>()).ln() / total } else { f64::INFINITY };
        if t + wait >= phase_end {
            loss += infected as f64 * (phase_end - t);
            t = phase_end;
            if released {
                break;
            }
            released = true;
            continue;
        }
        loss += infected as f64 * wait;
        t += wait;

        // Pick the firing channel proportionally to its rate.
        let mut target = rng.gen::<f64>() * total;
        let mut chosen = None;
        'scan: for node in 0..n {
            let channels: [(f64, Health); 2] = match state[node] {
                Health::Susceptible => [
                    (p.beta * f64::from(pressure[node]), Health::Infected),
                    (vaccination, Health::Recovered),
                ],
                Health::Infected => [(recovery, Health::Recovered), (0.0, Health::Recovered)],
                Health::Recovered => continue,
            };
            for (rate, to) in channels {
                if rate <= 0.0 {
                    continue;
                }
                chosen = Some((node, to));
                if target < rate {
                    break 'scan;
                }
                target -= rate;
            }
        }
        let (node, to) = chosen.expect("positive total rate implies an enabled channel");

        match (state[node], to) {
            (Health::Susceptible, Health::Infected) => {
                infected += 1;
                for &i in net.out_neighbors(node) {
                    pressure[i] += 1;
                }
            }
            (Health::Infected, Health::Recovered) => {
                infected -= 1;
                for &i in net.out_neighbors(node) {
                    pressure[i] -= 1;
                }
            }
            _ => {}
        }
        state[node] = to;
        events.push(Event { time: t, node, to });
    }
    SamplePath { events, loss }
}

impl SamplePath {
    /// Host labels (row-major `grid x n`) and cumulative loss at each grid time.
    fn on_grid(&self, init: &HostState, grid: &[f64]) -> (Vec<Health>, Vec<f64>) {
        let n = init.len();
        let mut state = init.0.clone();
        let mut infected = state.iter().filter(|&&h| h == Health::Infected).count();
        let mut labels = Vec::with_capacity(grid.len() * n);
        let mut losses = Vec::with_capacity(grid.len());
        let (mut loss, mut last) = (0.0, 0.0);
        let mut next = 0;
        for &g in grid {
            while next < self.events.len() && self.events[next].time <= g {
                let e = self.events[next];
                loss += infected as f64 * (e.time - last);
                last = e.time;
                match (state[e.node], e.to) {
                    (Health::Susceptible, Health::Infected) => infected += 1,
                    (Health::Infected, Health::Recovered) => infected -= 1,
                    _ => {}
                }
                state[e.node] = e.to;
                next += 1;
            }
            loss += infected as f64 * (g - last);
            last = g;
            labels.extend_from_slice(&state);
            losses.push(loss);
        }
        (labels, losses)
    }
}

/// Monte Carlo estimate of per-host marginals on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalEstimate {
    pub times: Vec<f64>,
    pub n: usize,
    pub runs: usize,
    /// Row-major `times x n`.
    pub mean_infected: Vec<f64>,
    pub mean_recovered: Vec<f64>,
    pub stderr_infected: Vec<f64>,
    pub stderr_recovered: Vec<f64>,
    /// Mean realized cumulative loss at each grid time.
    pub mean_loss: Vec<f64>,
    pub stderr_loss: Vec<f64>,
    /// Mean realized loss over the whole window `[0, T]`.
    pub mean_total_loss: f64,
    pub stderr_total_loss: f64,
}

#[derive(Default)]
struct Tally {
    infected: Vec<u64>,
    recovered: Vec<u64>,
    loss_sum: Vec<f64>,
    loss_sq: Vec<f64>,
    total_sum: f64,
    total_sq: f64,
}

/// Independent runs with per-run seeds `derive(seed, Gillespie, run)`.
///
/// Runs are tallied in fixed-size chunks and chunks are merged in index order,
/// so the result is bit-identical for any thread count.
pub fn estimate_marginals(
    net: &Network,
    p: &ModelParams,
    init: &HostState,
    runs: usize,
    grid: &[f64],
    seed: u64,
) -> Result<MarginalEstimate, OracleError> {
    check_inputs(net, p, init)?;
    check_grid(grid, p.horizon)?;
    if runs == 0 {
        return Err(OracleError::NoRuns);
    }
    let n = net.node_count();
    let cells = grid.len() * n;
    let chunks = runs.div_ceil(RUNS_PER_CHUNK);
    let tallies: Vec<Tally> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut tally = Tally {
                infected: vec![0; cells],
                recovered: vec![0; cells],
                loss_sum: vec![0.0; grid.len()],
                loss_sq: vec![0.0; grid.len()],
                ..Tally::default()
            };
            for run in chunk * RUNS_PER_CHUNK..((chunk + 1) * RUNS_PER_CHUNK).min(runs) {
                let mut rng = seed::rng(seed, Stream::Gillespie, run as u64);
                let path = sample_path(net, p, init, &mut rng);
                let (labels, losses) = path.on_grid(init, grid);
                for (cell, label) in labels.iter().enumerate() {
                    match label {
                        Health::Infected => tally.infected[cell] += 1,
                        Health::Recovered => tally.recovered[cell] += 1,
                        Health::Susceptible => {}
                    }
                }
                for (k, &l) in losses.iter().enumerate() {
                    tally.loss_sum[k] += l;
                    tally.loss_sq[k] += l * l;
                }
                tally.total_sum += path.loss;
                tally.total_sq += path.loss * path.loss;
            }
            tally
        })
        .collect();

    let mut infected = vec![0u64; cells];
    let mut recovered = vec![0u64; cells];
    let mut loss_sum = vec![0.0; grid.len()];
    let mut loss_sq = vec![0.0; grid.len()];
    let (mut total_sum, mut total_sq) = (0.0, 0.0);
    for tally in &tallies {
        for c in 0..cells {
            infected[c] += tally.infected[c];
            recovered[c] += tally.recovered[c];
        }
        for k in 0..grid.len() {
            loss_sum[k] += tally.loss_sum[k];
            loss_sq[k] += tally.loss_sq[k];
        }
        total_sum += tally.total_sum;
        total_sq += tally.total_sq;
    }

    let r = runs as f64;
    let proportion = |count: &[u64]| -> (Vec<f64>, Vec<f64>) {
        count
            .iter()
            .map(|&c| {
                let m = c as f64 / r;
                (m, (m * (1.0 - m) / r).sqrt())
            })
            .unzip()
    };
    let moments = |sum: f64, sq: f64| {
        let m = sum / r;
        (m, ((sq / r - m * m).max(0.0) / r).sqrt())
    };
    let (mean_infected, stderr_infected) = proportion(&infected);
    let (mean_recovered, stderr_recovered) = proportion(&recovered);
    let (mean_loss, stderr_loss) = loss_sum.iter().zip(&loss_sq).map(|(&s, &q)| moments(s, q)).unzip();
    let (mean_total_loss, stderr_total_loss) = moments(total_sum, total_sq);
    Ok(MarginalEstimate {
        times: grid.to_vec(),
        n,
        runs,
        mean_infected,
        mean_recovered,
        stderr_infected,
        stderr_recovered,
        mean_loss,
        stderr_loss,
        mean_total_loss,
        stderr_total_loss,
    })
}

impl MarginalEstimate {
    /// Trajectory CSV schema followed by `seI_*` and `seR_*` standard-error blocks.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_state_csv(
            w,
            &self.times,
            &self.mean_loss,
            self.n,
            &[
                Block { prefix: "I", values: &self.mean_infected },
                Block { prefix: "R", values: &self.mean_recovered },
                Block { prefix: "seI", values: &self.stderr_infected },
                Block { prefix: "seR", values: &self.stderr_recovered },
            ],
        )
    }

    /// Trapezoid rule over `Σ_i mean_I` on the grid.
    pub fn trapezoid_loss(&self) -> f64 {
        let totals: Vec<f64> = self.mean_infected.chunks(self.n).map(|row| row.iter().sum()).collect();
        self.times
            .windows(2)
            .zip(totals.windows(2))
            .map(|(t, s)| 0.5 * (t[1] - t[0]) * (s[0] + s[1]))
            .sum()
    }
}

/// Per-phase transition lists in compressed-row form.
struct Transitions {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    rates: Vec<f64>,
    outflow: Vec<f64>,
}

/// Forward equations over every joint host state.
///
/// A state is the base-3 integer `Σ_i label_i * 3^i`.
pub struct MasterEquation {
    n: usize,
    params: ModelParams,
    powers: Vec<usize>,
    infected_count: Vec<f64>,
    before: Transitions,
    after: Transitions,
}

impl MasterEquation {
    pub fn new(net: &Network, p: &ModelParams) -> Result<Self, OracleError> {
        p.validate()?;
        let n = net.node_count();
        if n > MAX_MASTER_NODES {
            return Err(OracleError::TooManyNodes(n));
        }
        let powers: Vec<usize> = (0..n).map(|i| 3usize.pow(i as u32)).collect();
        let states = 3usize.pow(n as u32);
        let digit = |s: usize, i: usize| (s / powers[i]) % 3;
        let infected_count = (0..states).map(|s| (0..n).filter(|&i| digit(s, i) == 1).count() as f64).collect();

        let build = |released: bool| {
            let mut t = Transitions { offsets: vec![0], targets: Vec::new(), rates: Vec::new(), outflow: Vec::new() };
            for s in 0..states {
                let mut out = 0.0;
                let mut push = |target: usize, rate: f64| {
                    if rate > 0.0 {
                        t.targets.push(target as u32);
                        t.rates.push(rate);
                        out += rate;
                    }
                };
                for i in 0..n {
                    match digit(s, i) {
                        0 => {
                            let m = net.in_neighbors(i).iter().filter(|&&j| digit(s, j) == 1).count();
                            push(s + powers[i], p.beta * m as f64);
                            if released {
                                push(s + 2 * powers[i], p.theta);
                            }
                        }
                        1 if released => push(s + powers[i], p.gamma),
                        _ => {}
                    }
                }
                t.outflow.push(out);
                t.offsets.push(t.targets.len());
            }
            t
        };
        let (before, after) = (build(false), build(true));
        Ok(Self { n, params: *p, powers, infected_count, before, after })
    }

    pub fn state_count(&self) -> usize {
        self.infected_count.len()
    }

    fn encode(&self, init: &HostState) -> usize {
        init.0.iter().enumerate().map(|(i, &h)| h as usize * self.powers[i]).sum()
    }

    /// Packed state: `π` over all joint states followed by the loss integral.
    fn derivative(&self, released: bool, y: &[f64], dy: &mut [f64]) {
        let t = if released { &self.after } else { &self.before };
        let states = self.state_count();
        for s in 0..states {
            dy[s] = -t.outflow[s] * y[s];
        }
        for s in 0..states {
            let mass = y[s];
            if mass == 0.0 {
                continue;
            }
            for e in t.offsets[s]..t.offsets[s + 1] {
                dy[t.targets[e] as usize] += t.rates[e] * mass;
            }
        }
        dy[states] = y[..states].iter().zip(&self.infected_count).map(|(p, c)| p * c).sum();
    }

    fn rk4(&self, released: bool, y: &mut [f64], h: f64, work: &mut [Vec<f64>; 5]) {
        let [k1, k2, k3, k4, tmp] = work;
        self.derivative(released, y, k1);
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        self.derivative(released, tmp, k2);
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        self.derivative(released, tmp, k3);
        for i in 0..y.len() {
            tmp[i] = y[i] + h * k3[i];
        }
        self.derivative(released, tmp, k4);
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// Integrates from the point mass at `init` and marginalizes at each grid time.
    /// Steps never exceed `max_step` and break exactly at `tau` and every grid point.
    pub fn marginals(&self, init: &HostState, grid: &[f64], max_step: f64) -> Result<ExactMarginals, OracleError> {
        if init.len() != self.n {
            return Err(OracleError::SizeMismatch { expected: self.n, got: init.len() });
        }
        check_grid(grid, self.params.horizon)?;
        if !(max_step > 0.0 && max_step <= MASTER_STEP) {
            return Err(OracleError::InvalidStep(max_step));
        }
        let states = self.state_count();
        let mut y = vec![0.0; states + 1];
        y[self.encode(init)] = 1.0;
        let mut work: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; states + 1]);
        let tau = self.params.tau;

        let mut out = ExactMarginals {
            times: grid.to_vec(),
            n: self.n,
            infected: Vec::with_capacity(grid.len() * self.n),
            recovered: Vec::with_capacity(grid.len() * self.n),
            cumulative_loss: Vec::with_capacity(grid.len()),
            total_probability: Vec::with_capacity(grid.len()),
        };
        let mut t = 0.0;
        for &g in grid {
            while t < g {
                let released = t >= tau;
                let stop = if !released && g > tau { tau } else { g };
                let pieces = ((stop - t) / max_step).ceil().max(1.0);
                let h = (stop - t) / pieces;
                for _ in 0..pieces as usize {
                    self.rk4(released, &mut y, h, &mut work);
                }
                t = stop;
            }
            self.record(&y, &mut out);
        }
        Ok(out)
    }

    fn record(&self, y: &[f64], out: &mut ExactMarginals) {
        let states = self.state_count();
        let mut infected = vec![0.0; self.n];
        let mut recovered = vec![0.0; self.n];
        for (s, &mass) in y[..states].iter().enumerate() {
            for i in 0..self.n {
                match (s / self.powers[i]) % 3 {
                    1 => infected[i] += mass,
                    2 => recovered[i] += mass,
                    _ => {}
                }
            }
        }
        out.infected.extend(infected);
        out.recovered.extend(recovered);
        out.cumulative_loss.push(y[states]);
        out.total_probability.push(y[..states].iter().sum());
    }
}

/// Exact per-host marginals on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMarginals {
    pub times: Vec<f64>,
    pub n: usize,
    /// Row-major `times x n`.
    pub infected: Vec<f64>,
    pub recovered: Vec<f64>,
    pub cumulative_loss: Vec<f64>,
    /// `Σ_s π(s)` at each grid time.
    pub total_probability: Vec<f64>,
}

impl ExactMarginals {
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_state_csv(
            w,
            &self.times,
            &self.cumulative_loss,
            self.n,
            &[
                Block { prefix: "I", values: &self.infected },
                Block { prefix: "R", values: &self.recovered },
            ],
        )
    }

    pub fn max_probability_drift(&self) -> f64 {
        self.total_probability.iter().map(|p| (p - 1.0).abs()).fold(0.0, f64::max)
    }
}

pub fn master_equation_marginals(
    net: &Network,
    p: &ModelParams,
    init: &HostState,
    grid: &[f64],
) -> Result<ExactMarginals, OracleError> {
    check_inputs(net, p, init)?;
    MasterEquation::new(net, p)?.marginals(init, grid, MASTER_STEP)
}

/// Outcome of checking Monte Carlo marginals against exact ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    /// Number of (host, checkpoint, compartment) comparisons.
    pub checks: usize,
    pub within: usize,
    pub max_abs_gap: f64,
}

impl Agreement {
    pub fn fraction(&self) -> f64 {
        self.within as f64 / self.checks as f64
    }
}

/// Counts estimates within `z` standard errors of the exact marginal.
///
/// The standard error is the sampling error of a proportion under the exact
/// probability, `sqrt(p (1 - p) / runs)`, so deterministic entries must match exactly.
pub fn compare_marginals(mc: &MarginalEstimate, exact: &ExactMarginals, z: f64) -> Agreement {
    assert_eq!(mc.times, exact.times, "grids differ");
    assert_eq!(mc.n, exact.n, "node counts differ");
    let runs = mc.runs as f64;
    let mut agreement = Agreement { checks: 0, within: 0, max_abs_gap: 0.0 };
    for (estimates, truth) in [(&mc.mean_infected, &exact.infected), (&mc.mean_recovered, &exact.recovered)] {
        for (&m, &p) in estimates.iter().zip(truth.iter()) {
            let q = p.clamp(0.0, 1.0);
            let se = (q * (1.0 - q) / runs).sqrt();
            let gap = (m - p).abs();
            agreement.checks += 1;
            agreement.max_abs_gap = agreement.max_abs_gap.max(gap);
            if gap <= z * se + 1e-12 {
                agreement.within += 1;
            }
        }
    }
    agreement
}

/// Largest `|I_ode - I_exact|` or `|R_ode - R_exact|` over the exact grid,
/// reading the trajectory by linear interpolation.
pub fn mean_field_gap(traj: &Trajectory, exact: &ExactMarginals) -> f64 {
    let n = exact.n;
    let times = traj.times();
    let mut gap = 0.0f64;
    for (k, &t) in exact.times.iter().enumerate() {
        let hi = times.partition_point(|&x| x < t).min(times.len() - 1);
        let lo = hi.saturating_sub(1);
        let w = if times[hi] == times[lo] { 1.0 } else { (t - times[lo]) / (times[hi] - times[lo]) };
        let w = w.clamp(0.0, 1.0);
        for i in 0..n {
            let ode_i = (1.0 - w) * traj.infected_at(lo)[i] + w * traj.infected_at(hi)[i];
            let ode_r = (1.0 - w) * traj.recovered_at(lo)[i] + w * traj.recovered_at(hi)[i];
            gap = gap
                .max((ode_i - exact.infected[k * n + i]).abs())
                .max((ode_r - exact.recovered[k * n + i]).abs());
        }
    }
    gap
}
