use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use virus_damage::dynamics::{integrate, Trajectory};
use virus_damage::experiments::{
    find_optimal_delay, marginal_curve, structure_curve, CurveResult, Family, Interval, Param, SweepSpec,
};
use virus_damage::export::fmt_f64;
use virus_damage::graph::{degree_stats, generate_scale_free, generate_small_world, Network};
use virus_damage::oracle::{
    compare_marginals, estimate_marginals, master_equation_marginals, mean_field_gap, ExactMarginals, HostState,
    MarginalEstimate, OracleError, MAX_MASTER_NODES,
};
use virus_damage::{total_damage, ModelParams};

use crate::config::{CurveConfig, Fixture, RunConfig};
use crate::{CliError, GenKind, GenNetArgs, OracleArgs, RunArgs};

const DEFAULT_CURVE_POINTS: usize = 5;
const ORACLE_Z: f64 = 3.0;
const ORACLE_MIN_FRACTION: f64 = 0.99;
const ORACLE_MAX_DRIFT: f64 = 1e-8;
const CLOSED_FORM_TOL: f64 = 1e-6;

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl RunArgs {
    /// Reads the config, applies flag overrides and validates the result.
    pub(crate) fn load(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(step) = self.step {
            cfg.step = step;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(samples) = self.samples {
            match cfg.sweep.as_mut() {
                Some(sweep) => sweep.samples = samples,
                None => return Err(CliError::Config("--samples needs a `sweep` section".into())),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_file(dir: &Path, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    write_file(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

/// Manifest echoing the resolved configuration next to the files it produced.
fn write_manifest(cfg: &RunConfig, command: &str, outputs: &[String], extra: Value) -> Result<(), CliError> {
    let mut manifest = json!({
        "command": command,
        "seed": cfg.seed,
        "config": cfg,
        "outputs": outputs,
    });
    if let (Value::Object(m), Value::Object(x)) = (&mut manifest, extra) {
        m.extend(x);
    }
    write_json(&cfg.output_dir, "manifest.json", &manifest)
}

pub fn gen_net(args: GenNetArgs) -> Result<(), CliError> {
    let net = match args.kind {
        GenKind::ScaleFree { n, edges, exponent, seed } => generate_scale_free(n, edges, exponent, seed),
        GenKind::SmallWorld { n, k, p, seed } => generate_small_world(n, k, p, seed),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;

    match &args.out {
        Some(path) => {
            let mut options = OpenOptions::new();
            options.write(true);
            if args.force {
                options.create(true).truncate(true);
            } else {
                options.create_new(true);
            }
            let file = options.open(path).map_err(|e| match e.kind() {
                io::ErrorKind::AlreadyExists => {
                    CliError::Config(format!("{} exists; pass --force to overwrite", path.display()))
                }
                _ => CliError::Io(format!("{}: {e}", path.display())),
            })?;
            let mut w = BufWriter::new(file);
            net.write_edge_list(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            net.write_edge_list(&mut w)?;
            w.flush()?;
        }
    }
    eprintln!("{}", degree_stats(&net));
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let model = *RunConfig::require(&cfg.model, "model")?;
    let cost = *RunConfig::require(&cfg.cost, "cost")?;
    let net = cfg.build_network()?;
    let init = cfg.initial_condition(net.node_count())?;
    eprintln!("simulate: {} nodes, {} edges, T = {}", net.node_count(), net.edge_count(), model.horizon);
    let traj = integrate(&net, &model, &init, cfg.step)?;
    let report = total_damage(&traj, &cost, model.tau).map_err(|e| CliError::Config(e.to_string()))?;

    let dir = &cfg.output_dir;
    write_file(dir, "trajectory.csv", |w| traj.write_csv(w))?;
    write_json(
        dir,
        "damage.json",
        &json!({
            "economic_loss": report.economic_loss,
            "antivirus_cost": report.antivirus_cost,
            "total": report.total,
            "params": { "model": model, "cost": cost, "step": cfg.step, "seed": cfg.seed, "init": cfg.init },
        }),
    )?;
    write_manifest(cfg, "simulate", &["trajectory.csv".into(), "damage.json".into()], json!({}))?;
    println!("economic_loss {}\nantivirus_cost {}\ntotal {}", report.economic_loss, report.antivirus_cost, report.total);
    Ok(())
}

fn default_family_grid(family: &Family, points: usize) -> Vec<f64> {
    match family {
        Family::ScaleFree { .. } => Interval::new(2.7, 3.1).linspace(points),
        Family::SmallWorld { .. } => Interval::new(0.1, 0.3).linspace(points),
    }
}

fn write_curve(cfg: &RunConfig, result: &CurveResult, file: &str) -> Result<(), CliError> {
    write_file(&cfg.output_dir, file, |w| result.write_csv(w))?;
    eprintln!("  {}: spearman_sign {:+}", result.parameter, result.spearman_sign);
    Ok(())
}

fn curve_summary(result: &CurveResult, file: &str) -> Value {
    json!({ "parameter": result.parameter, "file": file, "spearman_sign": result.spearman_sign })
}

pub fn curve(cfg: &RunConfig, param_flag: Option<&str>) -> Result<(), CliError> {
    let spec = cfg.sweep_spec()?;
    let curve_cfg = cfg.curve.clone().unwrap_or(CurveConfig { param: None, family: None, grid: None, points: None });
    let points = curve_cfg.points.unwrap_or(DEFAULT_CURVE_POINTS);
    let param = param_flag.map(str::to_string).or(curve_cfg.param.clone());

    let (result, file) = match (param, curve_cfg.family) {
        (Some(name), None) => {
            let which: Param = name.parse()?;
            let grid = curve_cfg.grid.clone().unwrap_or_else(|| which.range(&spec.ranges).linspace(points));
            eprintln!("curve {}: {} grid points x {} samples", which.name(), grid.len(), spec.samples);
            (marginal_curve(&spec, which, &grid)?, format!("curve_{}.csv", which.name()))
        }
        (None, Some(family)) => {
            let grid = curve_cfg.grid.clone().unwrap_or_else(|| default_family_grid(&family, points));
            eprintln!("curve {}: {} grid points x {} samples", family.parameter_name(), grid.len(), spec.samples);
            (structure_curve(&spec, family, &grid)?, format!("structure_{}.csv", family.parameter_name()))
        }
        (Some(_), Some(_)) => return Err(CliError::Config("curve takes either a parameter or a family, not both".into())),
        (None, None) => return Err(CliError::Config("curve needs `curve.param`, `curve.family` or --param".into())),
    };
    write_curve(cfg, &result, &file)?;
    write_manifest(
        cfg,
        "curve",
        std::slice::from_ref(&file),
        json!({ "sweep": spec, "spearman_sign": result.spearman_sign, "curves": [curve_summary(&result, &file)] }),
    )
}

pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let spec: SweepSpec = cfg.sweep_spec()?;
    let points = cfg.curve.as_ref().and_then(|c| c.points).unwrap_or(DEFAULT_CURVE_POINTS);
    eprintln!("sweep: {points} grid points x {} samples per curve", spec.samples);

    let mut outputs = Vec::new();
    let mut curves = Vec::new();
    for which in Param::ALL {
        let grid = which.range(&spec.ranges).linspace(points);
        let result = marginal_curve(&spec, which, &grid)?;
        let file = format!("curve_{}.csv", which.name());
        write_curve(cfg, &result, &file)?;
        curves.push(curve_summary(&result, &file));
        outputs.push(file);
    }
    for family in [Family::SmallWorld { n: 100, k: 4 }, Family::ScaleFree { n: 100, edges: 109 }] {
        let result = structure_curve(&spec, family, &default_family_grid(&family, points))?;
        let file = format!("structure_{}.csv", family.parameter_name());
        write_curve(cfg, &result, &file)?;
        curves.push(curve_summary(&result, &file));
        outputs.push(file);
    }
    write_manifest(cfg, "sweep", &outputs, json!({ "sweep": spec, "curves": curves }))
}

pub fn optimal_delay(cfg: &RunConfig) -> Result<(), CliError> {
    let model = *RunConfig::require(&cfg.model, "model")?;
    let cost = *RunConfig::require(&cfg.cost, "cost")?;
    let search = RunConfig::require(&cfg.optimal_delay, "optimal_delay")?;
    let net = cfg.build_network()?;
    let init = cfg.initial_condition(net.node_count())?;
    eprintln!(
        "optimal-delay: tau in [{}, {}], {} coarse points, tol {}",
        search.tau_range.lo, search.tau_range.hi, search.coarse_points, search.tol
    );
    let found = find_optimal_delay(&net, &model, &cost, &init, search.tau_range, search.coarse_points, search.tol, cfg.step)?;

    write_file(&cfg.output_dir, "optimal_delay.csv", |w| {
        writeln!(w, "tau,economic_loss,antivirus_cost,total")?;
        for (tau, r) in &found.curve {
            writeln!(w, "{},{},{},{}", fmt_f64(*tau), fmt_f64(r.economic_loss), fmt_f64(r.antivirus_cost), fmt_f64(r.total))?;
        }
        Ok(())
    })?;
    let summary = json!({
        "tau_star": found.tau_star,
        "damage_star": found.damage_star,
        "boundary": found.boundary,
        "evaluations": found.evaluations,
    });
    write_json(&cfg.output_dir, "optimal_delay.json", &summary)?;
    write_manifest(cfg, "optimal-delay", &["optimal_delay.csv".into(), "optimal_delay.json".into()], json!({ "result": summary }))?;
    match found.boundary {
        Some(b) => println!("tau* = {} (minimum at the {:?} end of the range)", found.tau_star, b),
        None => println!("tau* = {}", found.tau_star),
    }
    println!("damage* = {}", found.damage_star.total);
    Ok(())
}

struct OracleSetup {
    label: String,
    net: Network,
    model: ModelParams,
    start: HostState,
    runs: usize,
    checkpoints: Vec<f64>,
    fixture: Option<Fixture>,
}

fn oracle_setup(args: &OracleArgs) -> Result<(RunConfig, OracleSetup), CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => serde_json::from_value(json!({})).expect("empty config is valid"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(step) = args.step {
        cfg.step = step;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;

    let section = cfg.oracle.clone();
    let fixture = args.fixture.or(section.as_ref().and_then(|s| s.fixture));
    let runs = args.runs.or(section.as_ref().map(|s| s.runs)).unwrap_or(100_000);
    let (label, net, model, start) = match fixture {
        Some(f) => {
            let net = f.network();
            let start = HostState::single_infected(net.node_count(), 0);
            (format!("{f:?}"), net, Fixture::params(), start)
        }
        None if args.config.is_none() => {
            return Err(CliError::Config("oracle-check needs --fixture or --config".into()));
        }
        None => {
            let net = cfg.build_network()?;
            if net.node_count() > MAX_MASTER_NODES {
                return Err(OracleError::TooManyNodes(net.node_count()).into());
            }
            let model = *RunConfig::require(&cfg.model, "model")?;
            let start = cfg.host_state(net.node_count())?;
            (format!("custom {}", net.meta().kind()), net, model, start)
        }
    };
    let checkpoints = section
        .and_then(|s| s.checkpoints)
        .unwrap_or_else(|| (0..=model.horizon.floor() as usize).map(|t| t as f64).collect());
    Ok((cfg, OracleSetup { label, net, model, start, runs, checkpoints, fixture }))
}

/// Linear interpolation of the trajectory's running loss at `t`.
fn loss_at(traj: &Trajectory, t: f64) -> f64 {
    let times = traj.times();
    let loss = traj.cumulative_loss();
    let hi = times.partition_point(|&x| x < t).min(times.len() - 1);
    let lo = hi.saturating_sub(1);
    if times[hi] == times[lo] {
        return loss[hi];
    }
    let w = ((t - times[lo]) / (times[hi] - times[lo])).clamp(0.0, 1.0);
    (1.0 - w) * loss[lo] + w * loss[hi]
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Isolated infected host: `I = 1` until `tau`, then `exp(-gamma (t - tau))`, with `R = 1 - I`.
fn closed_form_single(model: &ModelParams, times: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let infected: Vec<f64> =
        times.iter().map(|&t| if t < model.tau { 1.0 } else { (-model.gamma * (t - model.tau)).exp() }).collect();
    let recovered = times.iter().zip(&infected).map(|(&t, i)| if t < model.tau { 0.0 } else { 1.0 - i }).collect();
    let t_end = *times.last().expect("nonempty grid");
    let loss = if t_end <= model.tau {
        t_end
    } else {
        model.tau + (1.0 - (-model.gamma * (t_end - model.tau)).exp()) / model.gamma
    };
    (infected, recovered, loss)
}

fn mc_gap(mc: &MarginalEstimate, exact: &ExactMarginals) -> f64 {
    max_gap(&mc.mean_infected, &exact.infected).max(max_gap(&mc.mean_recovered, &exact.recovered))
}

pub fn oracle_check(args: OracleArgs) -> Result<(), CliError> {
    let (cfg, setup) = oracle_setup(&args)?;
    let OracleSetup { label, net, model, start, runs, checkpoints, fixture } = setup;
    let n = net.node_count();
    eprintln!("oracle-check {label}: N = {n}, {runs} runs, {} checkpoints", checkpoints.len());

    let exact = master_equation_marginals(&net, &model, &start, &checkpoints)?;
    let mc = estimate_marginals(&net, &model, &start, runs, &checkpoints, cfg.seed)?;
    let init = start.to_initial_condition().expect("fixture states have no recovered hosts");
    let traj = integrate(&net, &model, &init, cfg.step)?;

    let agreement = compare_marginals(&mc, &exact, ORACLE_Z);
    let drift = exact.max_probability_drift();
    let t_last = *checkpoints.last().expect("nonempty checkpoints");
    let exact_loss = *exact.cumulative_loss.last().expect("nonempty");
    let mc_loss = *mc.mean_loss.last().expect("nonempty");
    let mc_loss_se = *mc.stderr_loss.last().expect("nonempty");
    let ode_loss = loss_at(&traj, t_last);
    let ode_gap = mean_field_gap(&traj, &exact);
    let sampling_gap = mc_gap(&mc, &exact);

    let mut pass = agreement.fraction() >= ORACLE_MIN_FRACTION && drift <= ORACLE_MAX_DRIFT;
    let mut closed = Value::Null;
    let mut table = String::new();
    table.push_str(&format!("oracle check: {label} (N = {n}, {runs} runs, checkpoints up to t = {t_last})\n"));
    table.push_str(&format!("{:<12} {:>22} {:>22}\n", "method", "loss(t_last)", "max gap vs master"));
    table.push_str(&format!("{:<12} {:>22.12e} {:>22.3e}\n", "master", exact_loss, 0.0));
    table.push_str(&format!("{:<12} {:>22.12e} {:>22.3e}\n", "gillespie", mc_loss, sampling_gap));
    table.push_str(&format!("{:<12} {:>22.12e} {:>22.3e}\n", "mean-field", ode_loss, ode_gap));
    table.push_str(&format!("{:<12} {:>22.3e}\n", "gillespie se", mc_loss_se));

    if fixture == Some(Fixture::Single) {
        let (ci, cr, closed_loss) = closed_form_single(&model, &checkpoints);
        let master_gap = max_gap(&exact.infected, &ci).max(max_gap(&exact.recovered, &cr));
        let ode_closed = traj
            .times()
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let (i, r, _) = closed_form_single(&model, &[t]);
                (traj.infected_at(k)[0] - i[0]).abs().max((traj.recovered_at(k)[0] - r[0]).abs())
            })
            .fold(0.0, f64::max);
        let ode_loss_gap = (traj.final_loss() - closed_form_single(&model, &[model.horizon]).2).abs();
        let ok = master_gap <= CLOSED_FORM_TOL && ode_closed <= CLOSED_FORM_TOL && ode_loss_gap <= CLOSED_FORM_TOL;
        pass &= ok;
        table.push_str(&format!(
            "closed form: loss {closed_loss:.12e}; master gap {master_gap:.3e}, mean-field gap {ode_closed:.3e}, mean-field loss gap {ode_loss_gap:.3e} [tol {CLOSED_FORM_TOL:e}] {}\n",
            if ok { "ok" } else { "FAIL" }
        ));
        closed = json!({
            "loss": closed_loss,
            "master_gap": master_gap,
            "mean_field_gap": ode_closed,
            "mean_field_loss_gap": ode_loss_gap,
            "tolerance": CLOSED_FORM_TOL,
        });
    }
    table.push_str(&format!(
        "gillespie within {ORACLE_Z} se of master: {}/{} ({:.2}%) [need >= {:.0}%]\n",
        agreement.within,
        agreement.checks,
        100.0 * agreement.fraction(),
        100.0 * ORACLE_MIN_FRACTION
    ));
    table.push_str(&format!("master total-probability drift: {drift:.3e} [need <= {ORACLE_MAX_DRIFT:e}]\n"));
    table.push_str(&format!("result: {}\n", if pass { "PASS" } else { "FAIL" }));
    print!("{table}");

    if args.out.is_some() || args.config.is_some() {
        let dir = &cfg.output_dir;
        write_file(dir, "gillespie.csv", |w| mc.write_csv(w))?;
        write_file(dir, "master.csv", |w| exact.write_csv(w))?;
        write_file(dir, "mean_field.csv", |w| traj.write_csv(w))?;
        let report = json!({
            "label": label,
            "nodes": n,
            "runs": runs,
            "checkpoints": checkpoints,
            "agreement": agreement,
            "probability_drift": drift,
            "loss": { "master": exact_loss, "gillespie": mc_loss, "gillespie_stderr": mc_loss_se, "mean_field": ode_loss },
            "max_gap": { "gillespie": sampling_gap, "mean_field": ode_gap },
            "closed_form": closed,
            "pass": pass,
        });
        write_json(dir, "oracle_report.json", &report)?;
        let outputs = ["gillespie.csv", "master.csv", "mean_field.csv", "oracle_report.json"].map(String::from);
        write_manifest(&cfg, "oracle-check", &outputs, json!({ "model": model }))?;
    }
    if pass {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("oracle check failed for {label}")))
    }
}
