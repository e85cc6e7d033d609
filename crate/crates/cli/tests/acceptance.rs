//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{Cholesky, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use uge_bench::experiment::run_experiment;
use uge_bench::scenario::{mpc_unknown, to_open, ScenarioSpec};
use uge_core::cost::{evaluate_trajectory, CostWeights, GoalSpec};
use uge_core::planners::{uge_to, weighted_update, Method, PlannerConfig};
use uge_core::uncertainty::hellinger_sq_block;
use uge_core::vehicle::{jacobian, propagate_covariance, rollout, step};
use uge_core::world::{rasterize, Bounds, Circle, ObstacleSet};
use uge_core::*;

fn report(n: u32, ok: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

fn random_spd(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let a = Matrix3::from_fn(|_, _| rng.random_range(-0.8..0.8));
    a * a.transpose() + Matrix3::identity() * rng.random_range(0.1..0.6)
}

fn log_density(x: &Vector3<f64>, mean: &Vector3<f64>, chol: &Cholesky<f64, nalgebra::U3>) -> f64 {
    let d = x - mean;
    let z = chol.l().solve_lower_triangular(&d).expect("triangular solve");
    let log_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    -0.5 * (z.norm_squared() + log_det + 3.0 * (2.0 * std::f64::consts::PI).ln())
}

#[test]
fn criterion_01_hellinger_matches_monte_carlo() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (ca, cb) = (random_spd(&mut rng), random_spd(&mut rng));
        let ma = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let mb = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let a = GaussianBelief { mean: State::from_vector(&ma), cov: ca };
        let b = GaussianBelief { mean: State::from_vector(&mb), cov: cb };
        let closed = 1.0 - hellinger_sq_block(&a, &b).unwrap();

        let (la, lb) = (Cholesky::new(ca).unwrap(), Cholesky::new(cb).unwrap());
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let z = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let x = ma + la.l() * z;
            sum += (0.5 * (log_density(&x, &mb, &lb) - log_density(&x, &ma, &la))).exp();
        }
        worst = worst.max((sum / n as f64 - closed).abs());
    }
    let elapsed = started.elapsed();
    report(1, worst < 1e-2 && elapsed < Duration::from_secs(60), format!("max |BC error| {worst:.2e}, {elapsed:.1?}"));
}

#[test]
fn criterion_02_jacobian_matches_finite_differences() {
    let started = Instant::now();
    let p = VehicleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let s = State::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-6.0..6.0));
        let u = Control::new(rng.random_range(p.v_min..p.v_max), rng.random_range(-p.delta_max..p.delta_max));
        let a = jacobian(s, u, &p).unwrap();
        let h = 1e-6;
        for j in 0..3 {
            let (mut plus, mut minus) = (s.to_vector(), s.to_vector());
            plus[j] += h;
            minus[j] -= h;
            let col = (step(State::from_vector(&plus), u, &p).unwrap().to_vector()
                - step(State::from_vector(&minus), u, &p).unwrap().to_vector())
                / (2.0 * h);
            for i in 0..3 {
                worst = worst.max((a[(i, j)] - col[i]).abs());
            }
        }
    }
    let elapsed = started.elapsed();
    report(2, worst < 1e-6 && elapsed < Duration::from_secs(5), format!("max entry error {worst:.2e}, {elapsed:.1?}"));
}

#[test]
fn criterion_03_covariance_propagation() {
    let q = Matrix3::new(3e-3, 2e-4, -1e-4, 2e-4, 2e-3, 1e-4, -1e-4, 1e-4, 1e-3);
    let mut cov = q;
    let mut worst_identity = 0.0f64;
    for t in 1..=80 {
        cov = propagate_covariance(&cov, &Matrix3::identity(), &q).unwrap();
        worst_identity = worst_identity.max((cov - q * (t as f64 + 1.0)).abs().max());
    }

    let p = VehicleParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut min_eig = f64::INFINITY;
    for _ in 0..200 {
        let seq: ControlSequence = (0..80)
            .map(|_| Control::new(rng.random_range(p.v_min..p.v_max), rng.random_range(-p.delta_max..p.delta_max)))
            .collect();
        let states = rollout(State::default(), &seq, &p).unwrap();
        let mut c = q;
        for (s, u) in states.iter().zip(seq.iter()) {
            c = propagate_covariance(&c, &jacobian(*s, *u, &p).unwrap(), &q).unwrap();
            min_eig = min_eig.min(c.symmetric_eigen().eigenvalues.min());
        }
    }
    report(
        3,
        worst_identity <= 1e-12 && min_eig >= 0.0,
        format!("identity error {worst_identity:.1e}, min eigenvalue {min_eig:.2e}"),
    );
}

#[test]
fn criterion_04_separation_monotonicity() {
    let spec = to_open();
    let cfg = PlannerConfig { n: 8, m: 8, k: 4, ..spec.planner.clone() };
    let model = cfg.perturbation(Method::UgeMpc).unwrap();
    let belief = cfg.initial_belief(spec.start, None);
    let nominal = ControlSequence::constant(spec.initial_control, cfg.t_steps);
    let (mut violations, mut increased) = (0, 0);
    for run in 0..100u64 {
        let out = uge_to(&nominal, &cfg, &model, &belief, &spec.vehicle, StreamKey::new(run)).unwrap();
        violations += out.log.swaps.iter().filter(|s| s.chosen_score < s.incumbent_score).count();
        if out.final_mean_h2 > out.initial_mean_h2 {
            increased += 1;
        }
    }
    report(4, violations == 0 && increased >= 95, format!("{violations} decreasing swaps, H2 increased in {increased}/100"));
}

#[test]
fn criterion_05_weighted_update_invariances() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut shift_err, mut limit_err) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let t = rng.random_range(5..30);
        let l = rng.random_range(2..40);
        let nominal: ControlSequence =
            (0..t).map(|_| Control::new(rng.random_range(-1.0..1.0), rng.random_range(-0.4..0.4))).collect();
        let samples: Vec<ControlSequence> = (0..l)
            .map(|_| nominal.iter().map(|u| Control::new(u.v + rng.random_range(-0.5..0.5), u.delta + rng.random_range(-0.2..0.2))).collect())
            .collect();
        let costs: Vec<f64> = (0..l).map(|_| rng.random_range(0.0..1e3)).collect();
        let temp = rng.random_range(0.1..100.0);
        let shift = rng.random_range(-1e4..1e4);
        let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
        let a = weighted_update(&nominal, &samples, &costs, temp).unwrap();
        let b = weighted_update(&nominal, &samples, &shifted, temp).unwrap();
        for (u, v) in a.iter().zip(b.iter()) {
            shift_err = shift_err.max((u.v - v.v).abs()).max((u.delta - v.delta).abs());
        }

        let best = (0..l).min_by(|&i, &j| costs[i].total_cmp(&costs[j])).unwrap();
        let sharp = weighted_update(&nominal, &samples, &costs, 1e-12).unwrap();
        for ((u, s), n) in sharp.iter().zip(samples[best].iter()).zip(nominal.iter()) {
            let eta = (s.v - n.v, s.delta - n.delta);
            limit_err = limit_err.max((u.v - (n.v + eta.0)).abs()).max((u.delta - (n.delta + eta.1)).abs());
        }
    }
    report(5, shift_err < 1e-9 && limit_err < 1e-6, format!("shift error {shift_err:.1e}, argmin-limit error {limit_err:.1e}"));
}

fn bench_bin() -> &'static str {
    env!("CARGO_BIN_EXE_bench")
}

fn write_config(dir: &Path, spec: &ScenarioSpec) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(spec).unwrap()).unwrap();
    path
}

fn run_bench(config: &Path, out: &Path, threads: usize) {
    let status = Command::new(bench_bin())
        .args(["run", "--methods", "mppi,uge_mpc", "--threads", &threads.to_string(), "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn bench");
    assert!(status.status.success(), "bench failed: {}", String::from_utf8_lossy(&status.stderr));
}

struct Counts {
    successes: usize,
    trials: usize,
}

fn counts(csv_text: &str, method: &str) -> Counts {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (m, s) = (col("method"), col("success"));
    let mut c = Counts { successes: 0, trials: 0 };
    for row in rdr.records() {
        let row = row.unwrap();
        if &row[m] == method {
            c.trials += 1;
            if &row[s] == "true" {
                c.successes += 1;
            }
        }
    }
    c
}

struct GoalBehindRun {
    _dir: tempfile::TempDir,
    csv: String,
    elapsed: Duration,
}

fn goal_behind_spec() -> ScenarioSpec {
    let mut spec = to_open();
    spec.goals = vec![[-6.0, 0.0]];
    spec.trials = 10;
    spec.max_iterations = 100;
    spec
}

/// Single-threaded run of the goal-behind scenario, shared by criteria 6 and 9.
fn goal_behind() -> &'static GoalBehindRun {
    static RUN: OnceLock<GoalBehindRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let config = write_config(dir.path(), &goal_behind_spec());
        let out = dir.path().join("t1");
        let started = Instant::now();
        run_bench(&config, &out, 1);
        let elapsed = started.elapsed();
        let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
        GoalBehindRun { _dir: dir, csv, elapsed }
    })
}

#[test]
fn criterion_06_goal_behind_contrast() {
    let run = goal_behind();
    let spec = goal_behind_spec();
    let uge = counts(&run.csv, "uge_mpc");
    let mppi = counts(&run.csv, "mppi");
    let ok = spec.planner.budget == 2048
        && uge.trials == 10
        && mppi.trials == 10
        && uge.successes >= 8
        && mppi.successes <= 2
        && run.elapsed < Duration::from_secs(600);
    report(
        6,
        ok,
        format!("UGE-MPC {}/10, MPPI {}/10, {:.1?}", uge.successes, mppi.successes, run.elapsed),
    );
}

#[test]
fn criterion_07_forward_goal() {
    let mut spec = to_open();
    spec.goals = vec![[6.0, 0.0]];
    let uge = run_experiment(&spec, Method::UgeMpc).unwrap().stats.overall;
    let mppi = run_experiment(&spec, Method::Mppi).unwrap().stats.overall;
    let (ui, mi) = (uge.mean_success_iterations, mppi.mean_success_iterations);
    let ok = uge.successes == 10 && mppi.successes == 10 && matches!((ui, mi), (Some(u), Some(m)) if u <= m);
    report(
        7,
        ok,
        format!(
            "UGE-MPC {}/10 mean iteration {:?}, MPPI {}/10 mean iteration {:?}",
            uge.successes, ui, mppi.successes, mi
        ),
    );
}

#[test]
fn criterion_08_unknown_clutter_ordering() {
    let spec = mpc_unknown();
    let started = Instant::now();
    let uge = run_experiment(&spec, Method::UgeMpc).unwrap().stats.overall;
    let mppi = run_experiment(&spec, Method::Mppi).unwrap().stats.overall;
    let elapsed = started.elapsed();
    let ok = spec.environment_count() == 5
        && uge.trials == 50
        && uge.success_rate > mppi.success_rate
        && uge.success_rate >= 0.7
        && elapsed < Duration::from_secs(1800);
    report(
        8,
        ok,
        format!("UGE-MPC {:.2}, MPPI {:.2}, {:.1?}", uge.success_rate, mppi.success_rate, elapsed),
    );
}

#[test]
fn criterion_09_thread_count_determinism() {
    let first = goal_behind();
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &goal_behind_spec());
    let out = dir.path().join("t4");
    run_bench(&config, &out, 4);
    let second = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let rows = first.csv.lines().count().saturating_sub(1);
    report(9, first.csv == second, format!("{rows} rows compared, threads 1 vs 4"));
}

#[test]
fn criterion_10_cost_examples() {
    let open = rasterize(&ObstacleSet::default(), &Bounds::new(-4.0, -4.0, 4.0, 4.0), 0.05).unwrap();
    let fp = Footprint::default();
    let tw = CostWeights { lambda_u: 0.0, lambda_obs: 50.0, lambda_dist: 10.0, c_collided: 1e3 };

    // Straight run to (2, 0): states at x = 0, 0.5, ..., 2.0. The first
    // in-tolerance state is x = 2.0, which is terminal with zero distance.
    let goal = GoalSpec::new([2.0, 0.0], 0.3).unwrap();
    let states: Vec<State> = (0..5).map(|i| State::new(0.5 * i as f64, 0.0, 0.0)).collect();
    let controls = ControlSequence::constant(Control::new(0.5, 0.0), 4);
    let straight = evaluate_trajectory(&states, &controls, &open, &fp, &goal, &tw).total;
    let straight_ok = straight == 10.0 * (2.0 + 1.5 + 1.0 + 0.5);

    // Start already inside the goal: only the terminal state cost counts.
    let goal = GoalSpec::new([0.25, 0.0], 0.3).unwrap();
    let w = CostWeights { lambda_u: 2.0, ..tw };
    let states = vec![State::default(); 6];
    let controls = ControlSequence::constant(Control::new(1.0, 0.2), 5);
    let at_goal = evaluate_trajectory(&states, &controls, &open, &fp, &goal, &w).total;
    let at_goal_ok = at_goal == 10.0 * 0.25;

    // Collision at t = 3 with distance 1.7 to the goal freezes the suffix.
    let obs = ObstacleSet { circles: vec![Circle { center: [2.0, 0.0], radius: 0.3 }], polygons: vec![] };
    let map = rasterize(&obs, &Bounds::new(-4.0, -4.0, 4.0, 4.0), 0.05).unwrap();
    let small = Footprint::Disc { radius: 0.1 };
    let goal = GoalSpec::new([3.5, 0.0], 0.3).unwrap();
    let xs = [0.0, 0.3, 0.6, 1.8, 2.5, 3.5];
    let states: Vec<State> = xs.iter().map(|&x| State::new(x, 0.0, 0.0)).collect();
    let b = evaluate_trajectory(&states, &ControlSequence::zeros(5), &map, &small, &goal, &tw);
    let frozen = 50.0 * 1e3 + 10.0 * 1.7;
    let want = 10.0 * (3.5 + 3.2 + 2.9) + 3.0 * frozen;
    let collision_ok = b.collided_at == Some(3) && (b.total - want).abs() < 1e-9;

    report(
        10,
        straight_ok && at_goal_ok && collision_ok,
        format!("straight {straight}, at-goal {at_goal}, collision {} (want {want})", b.total),
    );
}
