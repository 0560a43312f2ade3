//! The delayed SIR model: per-host infection and recovery probabilities.
//!
//! Before the antivirus is released (`t < tau`) hosts can only become
//! infected. From `tau` on, infected hosts recover at rate `gamma` and
//! susceptible hosts are vaccinated at rate `theta`. The susceptible
//! probability is never stored; it is always `1 - I - R`.
//!
//! Integration uses classical fixed-step RK4 in two legs, `[0, tau]` and
//! `[tau, T]`, with the last substep of each leg shortened so that the grid
//! contains `tau` and `T` exactly. The economic-loss integral
//! `L(t) = ∫ Σ_i I_i` is carried as one extra state variable.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::export::{write_state_csv, Block};
use crate::graph::Network;

/// Default integrator step, in time units.
pub const DEFAULT_STEP: f64 = 0.01;

/// Slack allowed on the probability box before the step is declared unstable.
pub const BOX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("{name} must be positive and finite, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("delay tau = {tau} must satisfy 0 < tau < horizon = {horizon}")]
    DelayOutsideHorizon { tau: f64, horizon: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("integrator step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("initial condition has {got} entries, network has {expected} nodes")]
    SizeMismatch { expected: usize, got: usize },
    #[error("initial probability for node {node} is {value}, outside [0, 1]")]
    InvalidInitialCondition { node: usize, value: f64 },
    #[error("probability box violated at t = {t} for node {node} (I = {infected}, R = {recovered}); reduce the step")]
    InvariantBreach { t: f64, node: usize, infected: f64, recovered: f64 },
}

/// Dynamic rates, antivirus delay and horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Infection force per infected in-neighbour.
    pub beta: f64,
    /// Recovery rate of infected hosts once the antivirus is out.
    pub gamma: f64,
    /// Vaccination rate of susceptible hosts once the antivirus is out.
    pub theta: f64,
    /// Delay between the virus appearing and the antivirus release.
    pub tau: f64,
    /// End of the observation window, `T`.
    pub horizon: f64,
}

impl ModelParams {
    pub fn new(beta: f64, gamma: f64, theta: f64, tau: f64, horizon: f64) -> Result<Self, ParamsError> {
        let p = Self { beta, gamma, theta, tau, horizon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        for (name, value) in [("beta", self.beta), ("gamma", self.gamma), ("theta", self.theta), ("tau", self.tau)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ParamsError::NotPositive { name, value });
            }
        }
        if !(self.tau < self.horizon && self.horizon.is_finite()) {
            return Err(ParamsError::DelayOutsideHorizon { tau: self.tau, horizon: self.horizon });
        }
        Ok(())
    }

    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }
}

/// `I_i(0)` for every host. `R_i(0)` is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    i0: Vec<f64>,
}

impl InitialCondition {
    pub fn new(i0: Vec<f64>) -> Result<Self, DynamicsError> {
        if let Some((node, &value)) = i0.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(DynamicsError::InvalidInitialCondition { node, value });
        }
        Ok(Self { i0 })
    }

    /// One host infected with certainty, everyone else susceptible.
    pub fn single(n: usize, node: usize) -> Self {
        assert!(node < n, "seed host {node} out of range for {n} nodes");
        let mut i0 = vec![0.0; n];
        i0[node] = 1.0;
        Self { i0 }
    }

    /// Every host infected with the same probability `p0`.
    pub fn uniform(n: usize, p0: f64) -> Result<Self, DynamicsError> {
        Self::new(vec![p0; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self { i0: vec![0.0; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.i0
    }
}

/// Infection pressure `Σ_j a_ij I_j` for each host.
fn pressure(net: &Network, infected: &[f64], i: usize) -> f64 {
    net.in_neighbors(i).iter().map(|&j| infected[j]).sum()
}

/// `dI/dt` before the antivirus release.
pub fn rhs_phase1(infected: &[f64], net: &Network, beta: f64) -> Vec<f64> {
    (0..net.node_count())
        .map(|i| beta * (1.0 - infected[i]) * pressure(net, infected, i))
        .collect()
}

/// `(dI/dt, dR/dt)` after the antivirus release.
pub fn rhs_phase2(infected: &[f64], recovered: &[f64], net: &Network, p: &ModelParams) -> (Vec<f64>, Vec<f64>) {
    (0..net.node_count())
        .map(|i| {
            let susceptible = 1.0 - infected[i] - recovered[i];
            (
                p.beta * susceptible * pressure(net, infected, i) - p.gamma * infected[i],
                p.theta * susceptible + p.gamma * infected[i],
            )
        })
        .unzip()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    BeforeRelease,
    AfterRelease,
}

/// Right-hand side on the packed state `[I_0..I_{n-1}, R_0..R_{n-1}, L]`.
fn derivative(phase: Phase, net: &Network, p: &ModelParams, y: &[f64], dy: &mut [f64]) {
    let n = net.node_count();
    let (infected, rest) = y.split_at(n);
    let recovered = &rest[..n];
    for i in 0..n {
        let force = p.beta * pressure(net, infected, i);
        match phase {
            Phase::BeforeRelease => {
                dy[i] = force * (1.0 - infected[i]);
                dy[n + i] = 0.0;
            }
            Phase::AfterRelease => {
                let susceptible = 1.0 - infected[i] - recovered[i];
                dy[i] = force * susceptible - p.gamma * infected[i];
                dy[n + i] = p.theta * susceptible + p.gamma * infected[i];
            }
        }
    }
    dy[2 * n] = infected.iter().sum();
}

struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    fn new(len: usize) -> Self {
        Self {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            tmp: vec![0.0; len],
        }
    }

    fn step(&mut self, phase: Phase, net: &Network, p: &ModelParams, y: &mut [f64], h: f64) {
        derivative(phase, net, p, y, &mut self.k1);
        for (t, (&y, &k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k1)) {
            *t = y + 0.5 * h * k;
        }
        derivative(phase, net, p, &self.tmp, &mut self.k2);
        for (t, (&y, &k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k2)) {
            *t = y + 0.5 * h * k;
        }
        derivative(phase, net, p, &self.tmp, &mut self.k3);
        for (t, (&y, &k)) in self.tmp.iter_mut().zip(y.iter().zip(&self.k3)) {
            *t = y + h * k;
        }
        derivative(phase, net, p, &self.tmp, &mut self.k4);
        for (idx, y) in y.iter_mut().enumerate() {
            *y += h / 6.0 * (self.k1[idx] + 2.0 * self.k2[idx] + 2.0 * self.k3[idx] + self.k4[idx]);
        }
    }
}

/// Grid of a leg `[t0, t1]` after `t0`: multiples of `step`, with `t1` itself as the last point.
fn leg_times(t0: f64, t1: f64, step: f64) -> impl Iterator<Item = f64> {
    let steps = (((t1 - t0) / step) - 1e-9).ceil().max(1.0) as usize;
    (1..=steps).map(move |k| if k == steps { t1 } else { t0 + k as f64 * step })
}

/// Clamps round-off excursions and rejects anything beyond [`BOX_TOLERANCE`].
fn enforce_box(y: &mut [f64], n: usize, t: f64) -> Result<(), DynamicsError> {
    for node in 0..n {
        let (infected, recovered) = (y[node], y[n + node]);
        let inside = |v: f64| (-BOX_TOLERANCE..=1.0 + BOX_TOLERANCE).contains(&v);
        if !inside(infected) || !inside(recovered) || !(infected + recovered <= 1.0 + BOX_TOLERANCE) {
            return Err(DynamicsError::InvariantBreach { t, node, infected, recovered });
        }
        y[node] = infected.clamp(0.0, 1.0);
        y[n + node] = recovered.clamp(0.0, 1.0);
    }
    Ok(())
}

/// Runs the two-leg integration, calling `observe(t, state)` at `t = 0` and after every step.
fn run<F>(net: &Network, p: &ModelParams, init: &InitialCondition, step: f64, mut observe: F) -> Result<f64, DynamicsError>
where
    F: FnMut(f64, &[f64]),
{
    p.validate()?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(DynamicsError::InvalidStep(step));
    }
    let n = net.node_count();
    if init.i0.len() != n {
        return Err(DynamicsError::SizeMismatch { expected: n, got: init.i0.len() });
    }

    let mut y = vec![0.0; 2 * n + 1];
    y[..n].copy_from_slice(&init.i0);
    let mut work = Rk4Workspace::new(y.len());
    observe(0.0, &y);

    for (phase, start, end) in [(Phase::BeforeRelease, 0.0, p.tau), (Phase::AfterRelease, p.tau, p.horizon)] {
        let mut t = start;
        for next in leg_times(start, end, step) {
            work.step(phase, net, p, &mut y, next - t);
            t = next;
            enforce_box(&mut y, n, t)?;
            observe(t, &y);
        }
    }
    Ok(y[2 * n])
}

/// Integrates the delayed SIR model and records every grid point.
pub fn integrate(net: &Network, p: &ModelParams, init: &InitialCondition, step: f64) -> Result<Trajectory, DynamicsError> {
    let n = net.node_count();
    let mut traj = Trajectory {
        params: *p,
        n,
        times: Vec::new(),
        infected: Vec::new(),
        recovered: Vec::new(),
        cumulative_loss: Vec::new(),
    };
    run(net, p, init, step, |t, y| {
        traj.times.push(t);
        traj.infected.extend_from_slice(&y[..n]);
        traj.recovered.extend_from_slice(&y[n..2 * n]);
        traj.cumulative_loss.push(y[2 * n]);
    })?;
    Ok(traj)
}

/// `∫₀ᵀ Σ_i I_i dt` from the same integration as [`integrate`], without storing the grid.
pub fn final_loss(net: &Network, p: &ModelParams, init: &InitialCondition, step: f64) -> Result<f64, DynamicsError> {
    run(net, p, init, step, |_, _| {})
}

/// Per-host probabilities on the integration grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    params: ModelParams,
    n: usize,
    times: Vec<f64>,
    infected: Vec<f64>,
    recovered: Vec<f64>,
    cumulative_loss: Vec<f64>,
}

impl Trajectory {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `I_i(t_k)` for every host at grid index `k`.
    pub fn infected_at(&self, k: usize) -> &[f64] {
        &self.infected[k * self.n..(k + 1) * self.n]
    }

    /// `R_i(t_k)` for every host at grid index `k`.
    pub fn recovered_at(&self, k: usize) -> &[f64] {
        &self.recovered[k * self.n..(k + 1) * self.n]
    }

    pub fn infected(&self) -> &[f64] {
        &self.infected
    }

    pub fn recovered(&self) -> &[f64] {
        &self.recovered
    }

    pub fn cumulative_loss(&self) -> &[f64] {
        &self.cumulative_loss
    }

    /// Loss integral at `T`.
    pub fn final_loss(&self) -> f64 {
        self.cumulative_loss.last().copied().unwrap_or(0.0)
    }

    /// Trapezoid-rule quadrature of `Σ_i I_i` over the stored grid.
    pub fn trapezoid_loss(&self) -> f64 {
        let totals: Vec<f64> = (0..self.len()).map(|k| self.infected_at(k).iter().sum()).collect();
        self.times
            .windows(2)
            .zip(totals.windows(2))
            .map(|(t, s)| 0.5 * (t[1] - t[0]) * (s[0] + s[1]))
            .sum()
    }

    /// CSV with header `t,loss,I_0..I_{n-1},R_0..R_{n-1}`.
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
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_params() -> ModelParams {
        ModelParams::new(0.01, 0.2, 0.1, 5.0, 30.0).unwrap()
    }

    #[test]
    fn rhs_phase1_examples() {
        let net = Network::path(3);
        assert_eq!(rhs_phase1(&[0.0; 3], &net, 0.01), vec![0.0; 3]);
        assert_eq!(rhs_phase1(&[0.5], &Network::empty(1), 0.01), vec![0.0]);
        let d = rhs_phase1(&[1.0, 0.0, 0.0], &net, 0.01);
        assert_eq!(d, vec![0.0, 0.01, 0.0]);
    }

    #[test]
    fn rhs_phase2_examples() {
        let p = ModelParams::new(0.01, 0.2, 0.1, 5.0, 30.0).unwrap();
        let net = Network::path(3);
        assert_eq!(rhs_phase2(&[0.0; 3], &[1.0; 3], &net, &p), (vec![0.0; 3], vec![0.0; 3]));
        let iso = Network::empty(1);
        let (di, dr) = rhs_phase2(&[1.0], &[0.0], &iso, &p);
        assert!((di[0] + 0.2).abs() < 1e-15 && (dr[0] - 0.2).abs() < 1e-15);
        let (di, dr) = rhs_phase2(&[0.0], &[0.0], &iso, &p);
        assert_eq!((di[0], dr[0]), (0.0, 0.1));
    }

    #[test]
    fn grid_contains_tau_and_horizon_exactly() {
        let p = ModelParams::new(0.01, 0.2, 0.1, 5.123, 30.0).unwrap();
        let traj = integrate(&Network::path(2), &p, &InitialCondition::single(2, 0), 0.01).unwrap();
        assert!(traj.times().contains(&5.123));
        assert_eq!(*traj.times().last().unwrap(), 30.0);
        assert!(traj.times().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_infection_gives_pure_vaccination() {
        let p = fixture_params();
        let traj = integrate(&Network::path(3), &p, &InitialCondition::zeros(3), 0.01).unwrap();
        for k in 0..traj.len() {
            let t = traj.times()[k];
            assert!(traj.infected_at(k).iter().all(|&x| x == 0.0));
            let expected = if t < p.tau { 0.0 } else { 1.0 - (-p.theta * (t - p.tau)).exp() };
            for &r in traj.recovered_at(k) {
                assert!((r - expected).abs() < 1e-6);
            }
        }
        assert_eq!(traj.final_loss(), 0.0);
    }

    #[test]
    fn isolated_infected_host_matches_closed_form() {
        let p = fixture_params();
        let traj = integrate(&Network::empty(1), &p, &InitialCondition::single(1, 0), 0.01).unwrap();
        for k in 0..traj.len() {
            let t = traj.times()[k];
            let expected = if t < p.tau { 1.0 } else { (-p.gamma * (t - p.tau)).exp() };
            assert!((traj.infected_at(k)[0] - expected).abs() < 1e-6);
        }
        let loss = p.tau + (1.0 - (-p.gamma * (p.horizon - p.tau)).exp()) / p.gamma;
        assert!((traj.final_loss() - loss).abs() < 1e-6);
    }

    #[test]
    fn ode_loss_agrees_with_trapezoid() {
        let net = crate::graph::generate_small_world(30, 4, 0.2, 1).unwrap();
        let p = ModelParams::new(0.016, 0.1, 0.1, 10.0, 40.0).unwrap();
        let traj = integrate(&net, &p, &InitialCondition::single(30, 3), 0.01).unwrap();
        assert!((traj.final_loss() - traj.trapezoid_loss()).abs() < 1e-4);
        let direct = final_loss(&net, &p, &InitialCondition::single(30, 3), 0.01).unwrap();
        assert_eq!(direct, traj.final_loss());
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = fixture_params();
        let net = Network::empty(2);
        let init = InitialCondition::zeros(2);
        assert_eq!(integrate(&net, &p, &init, 0.0).unwrap_err(), DynamicsError::InvalidStep(0.0));
        assert!(matches!(
            integrate(&net, &p, &InitialCondition::zeros(3), 0.01),
            Err(DynamicsError::SizeMismatch { .. })
        ));
        assert!(InitialCondition::new(vec![0.5, 1.5]).is_err());
        assert!(ModelParams::new(0.01, 0.2, 0.1, 30.0, 30.0).is_err());
        assert!(ModelParams::new(0.0, 0.2, 0.1, 3.0, 30.0).is_err());
    }

    #[test]
    fn huge_step_is_reported_as_breach() {
        let p = ModelParams::new(0.016, 0.3, 0.3, 5.0, 30.0).unwrap();
        let err = integrate(&Network::empty(1), &p, &InitialCondition::single(1, 0), 20.0).unwrap_err();
        assert!(matches!(err, DynamicsError::InvariantBreach { .. }));
    }

    #[test]
    fn csv_header_and_rows() {
        let p = fixture_params();
        let traj = integrate(&Network::path(2), &p, &InitialCondition::single(2, 0), 1.0).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,loss,I_0,I_1,R_0,R_1");
        assert_eq!(lines.count(), traj.len());
    }
}
