//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#[path = "../../core/tests/common/reference.rs"]
mod reference;

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use virus_damage::dynamics::{final_loss, integrate, InitialCondition, ModelParams};
use virus_damage::experiments::{
    find_optimal_delay, marginal_curve, sample_params, structure_curve, Family, InitPolicy, Interval, NetworkSource,
    Param, ParamRanges, SweepSpec,
};
use virus_damage::graph::{generate_scale_free, generate_small_world, Network};
use virus_damage::oracle::{estimate_marginals, master_equation_marginals, HostState};
use virus_damage::seed;
use virus_damage::{economic_loss, CostParams};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixture_params() -> ModelParams {
    ModelParams::new(0.01, 0.2, 0.1, 5.0, 30.0).unwrap()
}

fn closed_form_trajectory() -> Outcome {
    let p = fixture_params();
    let traj = integrate(&Network::empty(1), &p, &InitialCondition::single(1, 0), 0.01).unwrap();
    let mut worst = 0.0f64;
    for (k, &t) in traj.times().iter().enumerate() {
        let expected = if t >= p.tau { (-p.gamma * (t - p.tau)).exp() } else { 1.0 };
        worst = worst.max((traj.infected_at(k)[0] - expected).abs());
    }
    let loss = p.tau + (1.0 - (-p.gamma * (p.horizon - p.tau)).exp()) / p.gamma;
    let loss_gap = (economic_loss(&traj) - loss).abs();
    check(worst <= 1e-6 && loss_gap <= 1e-6, format!("max |I - closed form| = {worst:.2e}, loss gap = {loss_gap:.2e} (tol 1e-6)"))
}

fn random_network<R: Rng>(rng: &mut R) -> Network {
    let s = rng.gen();
    if rng.gen_bool(0.5) {
        let exponent = [2.7, 2.8, 2.9, 3.0, 3.1][rng.gen_range(0..5)];
        generate_scale_free(100, 109, exponent, s).unwrap()
    } else {
        let rewire = [0.1, 0.15, 0.2, 0.25, 0.3][rng.gen_range(0..5)];
        generate_small_world(100, 4, rewire, s).unwrap()
    }
}

fn random_init<R: Rng>(rng: &mut R, n: usize) -> InitialCondition {
    if rng.gen_bool(0.5) {
        InitialCondition::single(n, rng.gen_range(0..n))
    } else {
        InitialCondition::uniform(n, rng.gen_range(0.0..0.2)).unwrap()
    }
}

fn probability_box() -> Outcome {
    const CASES: usize = 500;
    const TOL: f64 = 1e-9;
    let spec = SweepSpec { seed: 0xb0c5, ..SweepSpec::default() };
    let draws = sample_params(&spec, CASES).unwrap();
    let mut rng = seed::rng_from(0xb0c5);
    let mut violations = Vec::new();
    for (case, (model, _)) in draws.iter().enumerate() {
        let net = random_network(&mut rng);
        let init = random_init(&mut rng, net.node_count());
        let traj = integrate(&net, model, &init, 0.01).unwrap();
        let n = net.node_count();
        for (k, &t) in traj.times().iter().enumerate() {
            let (inf, rec) = (traj.infected_at(k), traj.recovered_at(k));
            for node in 0..n {
                let (i, r) = (inf[node], rec[node]);
                let mut bad = !(0.0..=1.0 + TOL).contains(&i) || !(0.0..=1.0 + TOL).contains(&r) || i + r > 1.0 + TOL;
                if t < model.tau {
                    bad |= r != 0.0;
                }
                if k > 0 {
                    let (i_prev, r_prev) = (traj.infected_at(k - 1)[node], traj.recovered_at(k - 1)[node]);
                    if t <= model.tau {
                        bad |= i < i_prev;
                    } else {
                        bad |= r < r_prev;
                    }
                }
                if bad {
                    violations.push(format!("case {case} t={t} node {node} I={i} R={r}"));
                }
            }
        }
    }
    check(
        violations.is_empty(),
        format!("{CASES} cases, {} violations{}", violations.len(), violations.first().map(|v| format!(", first: {v}")).unwrap_or_default()),
    )
}

fn integrator_order() -> Outcome {
    let net = Network::path(3);
    let p = fixture_params();
    let i0 = [1.0, 0.0, 0.0];
    // Step 1e-4, recorded every 0.02.
    let reference = reference::integrate(&net, &p, &i0, 50_000, 250_000, 200);
    let init = InitialCondition::new(i0.to_vec()).unwrap();
    let error = |step: f64| {
        let traj = integrate(&net, &p, &init, step).unwrap();
        let mut worst = 0.0f64;
        let mut matched = 0;
        for (k, &t) in traj.times().iter().enumerate() {
            let Some(r) = reference.times.iter().position(|&rt| (rt - t).abs() < 1e-9) else { continue };
            let y = &reference.states[r];
            matched += 1;
            for node in 0..3 {
                worst = worst
                    .max((traj.infected_at(k)[node] - y[node]).abs())
                    .max((traj.recovered_at(k)[node] - y[3 + node]).abs());
            }
            worst = worst.max((traj.cumulative_loss()[k] - y[6]).abs());
        }
        assert_eq!(matched, reference.times.len(), "every reference time is on the coarse grid");
        worst
    };
    let (coarse, fine) = (error(0.02), error(0.01));
    let ratio = coarse / fine;
    check((12.0..=20.0).contains(&ratio), format!("error(0.02) = {coarse:.3e}, error(0.01) = {fine:.3e}, ratio = {ratio:.2} (need [12, 20])"))
}

fn oracle_agreement() -> Outcome {
    const RUNS: usize = 100_000;
    let p = fixture_params();
    let grid: Vec<f64> = (0..=30).map(f64::from).collect();
    let mut details = Vec::new();
    let mut ok = true;
    for (name, net) in [("P2", Network::path(2)), ("P3", Network::path(3)), ("S4", Network::star(4))] {
        let n = net.node_count();
        let start = HostState::single_infected(n, 0);
        let exact = master_equation_marginals(&net, &p, &start, &grid).unwrap();
        let mc = estimate_marginals(&net, &p, &start, RUNS, &grid, 2024).unwrap();
        let within = |m: f64, q: f64| (m - q).abs() <= 3.0 * (q.clamp(0.0, 1.0) * (1.0 - q.clamp(0.0, 1.0)) / RUNS as f64).sqrt() + 1e-12;
        let pairs = grid.len() * n;
        let good = (0..pairs)
            .filter(|&c| within(mc.mean_infected[c], exact.infected[c]) && within(mc.mean_recovered[c], exact.recovered[c]))
            .count();
        let fraction = good as f64 / pairs as f64;
        let drift = exact.max_probability_drift();
        ok &= fraction >= 0.99 && drift <= 1e-8;
        details.push(format!("{name}: {good}/{pairs} pairs ({:.1}%), drift {drift:.1e}", 100.0 * fraction));
    }
    check(ok, details.join("; "))
}

fn grid_for(which: Param, spec: &SweepSpec) -> Vec<f64> {
    which.range(&spec.ranges).linspace(5)
}

fn signs(spec: &SweepSpec, expected: &[(Param, i8)]) -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    for &(which, want) in expected {
        let curve = marginal_curve(spec, which, &grid_for(which, spec)).unwrap();
        ok &= curve.spearman_sign == want;
        details.push(format!("{} {:+} (want {want:+})", which.name(), curve.spearman_sign));
    }
    check(ok, details.join(", "))
}

fn rate_monotonicity() -> Outcome {
    let spec = SweepSpec { seed: 2024, ..SweepSpec::default() };
    signs(&spec, &[(Param::Beta, 1), (Param::Gamma, -1), (Param::Theta, -1)])
}

fn cost_monotonicity() -> Outcome {
    let spec = SweepSpec { seed: 2024, ..SweepSpec::default() };
    let signs = signs(&spec, &[(Param::ACoeff, 1), (Param::Alpha, -1)]);

    let (tau, alpha) = (7.5, 2.5);
    let pinned = SweepSpec {
        ranges: ParamRanges {
            beta: Interval::point(0.01),
            gamma: Interval::point(0.2),
            theta: Interval::point(0.2),
            a_coeff: Interval::point(550.0),
            alpha: Interval::point(alpha),
            tau: Interval::point(tau),
        },
        networks: vec![NetworkSource::SmallWorld { n: 100, k: 4, rewire_prob: 0.2 }],
        init: InitPolicy::Host { node: 0 },
        samples: 5,
        seed: 2024,
        ..SweepSpec::default()
    };
    let grid = Interval::new(500.0, 600.0).linspace(6);
    let curve = marginal_curve(&pinned, Param::ACoeff, &grid).unwrap();
    let slope = tau.powf(-alpha);
    let worst = (1..grid.len())
        .map(|k| {
            let s = (curve.mean_damage[k] - curve.mean_damage[0]) / (grid[k] - grid[0]);
            ((s - slope) / slope).abs()
        })
        .fold(0.0, f64::max);
    let affine = worst <= 1e-9;
    let detail = format!("affine A-curve slope rel. error {worst:.2e} (tol 1e-9)");
    match signs {
        Ok(s) if affine => Ok(format!("{s}; {detail}")),
        Ok(s) | Err(s) => Err(format!("{s}; {detail}")),
    }
}

fn u_shape_fixture() -> (Network, ModelParams, CostParams, InitialCondition) {
    let net = generate_small_world(100, 4, 0.2, 7).unwrap();
    let model = ModelParams::new(0.01, 0.2, 0.1, 5.0, 100.0).unwrap();
    let cost = CostParams::new(550.0, 2.0).unwrap();
    let init = InitialCondition::single(100, 0);
    (net, model, cost, init)
}

fn optimal_delay() -> Outcome {
    let (net, model, cost, init) = u_shape_fixture();
    let range = Interval::new(1.0, 20.0);
    let found = find_optimal_delay(&net, &model, &cost, &init, range, 20, 1e-3, 0.01).unwrap();
    let damage = |tau: f64| final_loss(&net, &model.with_tau(tau), &init, 0.01).unwrap() + 550.0 * tau.powf(-2.0);
    let (lo, hi) = (damage(range.lo), damage(range.hi));
    let grid = Interval::new(1.0, 20.0).linspace(191);
    let grid_argmin = grid.iter().map(|&t| (t, damage(t))).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
    let star = found.damage_star.total;
    check(
        found.boundary.is_none() && star < lo && star < hi && (found.tau_star - grid_argmin).abs() <= 0.1,
        format!(
            "tau* = {:.4}, damage {star:.4} vs endpoints {lo:.4} / {hi:.4}, 0.1-grid argmin {grid_argmin:.1}",
            found.tau_star
        ),
    )
}

fn structure_directionality() -> Outcome {
    let spec = SweepSpec { seed: 2024, samples: 50, init: InitPolicy::Uniform { p0: 0.01 }, ..SweepSpec::default() };
    let sw = structure_curve(&spec, Family::SmallWorld { n: 100, k: 4 }, &Interval::new(0.1, 0.3).linspace(5)).unwrap();
    let sf = structure_curve(&spec, Family::ScaleFree { n: 100, edges: 109 }, &Interval::new(2.7, 3.1).linspace(5)).unwrap();
    check(
        sw.spearman_sign == 1 && sf.spearman_sign == -1,
        format!("rewire_prob {:+} (want +1), exponent {:+} (want -1)", sw.spearman_sign, sf.spearman_sign),
    )
}

fn run_cli(args: &[&str], threads: &str, cwd: &Path) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_virus-damage"))
        .args(args)
        .current_dir(cwd)
        .env("VIRUS_DAMAGE_THREADS", threads)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = walk(dir).into_iter().map(|p| (p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap())).collect();
    files.sort();
    files
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

const REPRO_CONFIG: &str = r#"{
  "seed": 99,
  "output_dir": "out",
  "network": { "kind": "small-world", "n": 60, "k": 4, "rewire_prob": 0.2 },
  "model": { "beta": 0.01, "gamma": 0.2, "theta": 0.1, "tau": 5, "horizon": 40 },
  "cost": { "a_coeff": 550, "alpha": 2 },
  "init": { "kind": "random-host" },
  "sweep": { "samples": 4, "horizon": 40 },
  "curve": { "param": "beta", "points": 3 },
  "optimal_delay": { "tau_range": { "lo": 1, "hi": 20 }, "coarse_points": 8, "tol": 0.01 }
}"#;

fn reproducibility() -> Outcome {
    let commands: [&[&str]; 6] = [
        &["gen-net", "scale-free", "--n", "100", "--edges", "109", "--exponent", "2.8", "--seed", "5", "--out", "out/net.txt"],
        &["simulate", "--config", "run.json"],
        &["curve", "--config", "run.json", "--param", "gamma"],
        &["sweep", "--config", "run.json", "--samples", "2"],
        &["optimal-delay", "--config", "run.json"],
        &["oracle-check", "--fixture", "P3", "--runs", "5000", "--out", "out"],
    ];
    let mut failures = Vec::new();
    for args in commands {
        let runs: Vec<_> = ["1", "3", "1"]
            .iter()
            .map(|threads| {
                let dir = tempfile::tempdir().unwrap();
                std::fs::write(dir.path().join("run.json"), REPRO_CONFIG).unwrap();
                std::fs::create_dir_all(dir.path().join("out")).unwrap();
                let stdout = run_cli(args, threads, dir.path());
                (stdout, snapshot(&dir.path().join("out")))
            })
            .collect();
        if runs.iter().any(|r| *r != runs[0]) || runs[0].1.is_empty() && runs[0].0.is_empty() {
            failures.push(args[0]);
        }
    }
    check(failures.is_empty(), format!("6 commands x threads 1/3/1, mismatches: {failures:?}"))
}

fn loss_monotone_in_delay() -> Outcome {
    const CASES: usize = 100;
    let spec = SweepSpec { seed: 0x7a0, ..SweepSpec::default() };
    let draws = sample_params(&spec, CASES).unwrap();
    let mut rng = seed::rng_from(0x7a0);
    let mut worst = f64::INFINITY;
    for (model, _) in &draws {
        let net = random_network(&mut rng);
        let init = random_init(&mut rng, net.node_count());
        let later = model.with_tau(model.tau + rng.gen_range(0.5..5.0));
        let drop = final_loss(&net, &later, &init, 0.01).unwrap() - final_loss(&net, model, &init, 0.01).unwrap();
        worst = worst.min(drop);
    }
    check(worst >= -1e-9, format!("{CASES} cases, min loss(tau') - loss(tau) = {worst:.3e} (need >= -1e-9)"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("closed-form isolated trajectory", closed_form_trajectory),
        ("probability box invariants", probability_box),
        ("integrator fourth-order convergence", integrator_order),
        ("Gillespie vs master equation", oracle_agreement),
        ("rate monotonicity (beta, gamma, theta)", rate_monotonicity),
        ("cost monotonicity (A, alpha) and affine A-curve", cost_monotonicity),
        ("interior optimal delay", optimal_delay),
        ("network structure directionality", structure_directionality),
        ("CLI byte reproducibility across thread counts", reproducibility),
        ("loss nondecreasing in delay", loss_monotone_in_delay),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2}: {name}", k + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {label} [{secs:.1}s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {label} [{secs:.1}s] {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
