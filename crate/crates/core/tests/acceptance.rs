//! Acceptance checks. Each check prints one PASS or FAIL line with the
//! measured values and the pinned tolerance; the process fails if any
//! check fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use airswarm::boids::{attraction_velocity, boids_step_swarm_with, BoidState, BoidsParams};
use airswarm::entropy::{cluster_entropy_at, pairwise_distances, total_entropy};
use airswarm::guidance::{
    closed_loop_matrix, polar_errors, sfkc_command, trim_minimization, validate_gains, FormationSlot, GuidanceGains, TrimGains, TrimTable,
};
use airswarm::metrics::compute_metrics;
use airswarm::rng::Substreams;
use airswarm::rpso::{rpso_step, rpso_step_with, ParticleState, PinnedDraws, RpsoParams};
use airswarm::scenario::{load_scenario, Scenario};
use airswarm::sim::run_simulation;
use airswarm::state::{integrate_pose, Pose, Vec3};
use airswarm::vehicle::VehicleParams;
use airswarm::Exec;

// Pinned tolerances.
const STABLE_RE_MAX: f64 = -1e-9;
const CONVERGED_RHO_M: f64 = 1.0;
const CONVERGENCE_HORIZON_S: f64 = 300.0;
const FOLLOWER_MEAN_MAX_M: f64 = 6.0;
const FOLLOWER_STD_MAX_M: f64 = 6.0;
const TARGET_LEADER_MEAN_M: (f64, f64) = (10.0, 40.0);
const CENTROID_DRIFT_MAX_M: f64 = 1e-12;
const ATTRACTION_SUM_MAX: f64 = 1e-9;
const BOIDS_CENTRE_MEAN_MAX_M: f64 = 6.0;
const QUADRATURE_STEP_M: f64 = 1e-3;
const QUADRATURE_REL_TOL: f64 = 1e-2;
const SCALE_REL_TOL: f64 = 1e-9;
const HAND_ENTROPY_TOL: f64 = 1e-6;
const RPSO_FINAL_FRACTION: f64 = 0.1;
const RPSO_HORIZON_S: f64 = 600.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn bundled(name: &str) -> Scenario {
    load_scenario(scenario_dir().join(name)).expect("bundled scenario loads")
}

fn within(elapsed: Duration, limit_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit_s, format!("{s:.2} s (< {limit_s} s)"))
}

/// Random triples inside the stable region have every eigenvalue in the open
/// left half plane; triples breaking one inequality are rejected.
fn gain_stability() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_re = f64::NEG_INFINITY;
    let mut bad = 0;
    for _ in 0..1000 {
        let k_rho = 1.0 - rng.random::<f64>();
        let k_zeta = k_rho + (2.0 - k_rho) * (1.0 - rng.random::<f64>());
        let k_epsilon = -1.0 + rng.random::<f64>();
        if k_epsilon >= 0.0 || k_zeta <= k_rho {
            continue;
        }
        let gains = GuidanceGains::new(k_rho, k_zeta, k_epsilon, 1.0);
        let a = closed_loop_matrix(&gains);
        let m = Matrix3::from_fn(|i, j| a[i][j]);
        for lambda in m.complex_eigenvalues().iter() {
            worst_re = worst_re.max(lambda.re);
        }
        if !validate_gains(&gains) {
            bad += 1;
        }
    }
    let mut accepted_violations = 0;
    for k in 0..1000 {
        let (mut k_rho, mut k_zeta, mut k_epsilon) = (0.5, 1.0, -0.5);
        match k % 3 {
            0 => k_rho = -rng.random::<f64>(),
            1 => k_zeta = k_rho - rng.random::<f64>(),
            _ => k_epsilon = rng.random::<f64>(),
        }
        let gains = GuidanceGains::new(k_rho, k_zeta, k_epsilon, 1.0);
        let m = Matrix3::from_fn(|i, j| closed_loop_matrix(&gains)[i][j]);
        let unstable = m.complex_eigenvalues().iter().any(|l| l.re >= 0.0);
        if validate_gains(&gains) && !unstable {
            accepted_violations += 1;
        }
    }
    let (fast, time) = within(start.elapsed(), 1.0);
    outcome(
        worst_re < STABLE_RE_MAX && bad == 0 && accepted_violations == 0 && fast,
        format!("max Re(lambda) {worst_re:.3e} (< {STABLE_RE_MAX:e}), stable triples rejected {bad}, violating triples accepted {accepted_violations}, {time}"),
    )
}

/// Unicycle driven directly by the feedback command toward a goal 100 m away.
fn sfkc_convergence() -> Outcome {
    let start = Instant::now();
    let gains = GuidanceGains::default();
    let limits = VehicleParams::default();
    let goal = Vec3::planar(100.0, 0.0);
    let dt = 0.1;
    let mut pose = Pose::from_yaw(Vec3::ZERO, 1.0);
    let mut first_inside = None;
    let mut left_after = false;
    let mut last_rho = f64::NAN;
    for k in 0..=(CONVERGENCE_HORIZON_S / dt) as usize {
        let t = k as f64 * dt;
        let rho = (goal - pose.position).planar_norm();
        last_rho = rho;
        if rho < CONVERGED_RHO_M {
            first_inside.get_or_insert(t);
        } else if first_inside.is_some() {
            left_after = true;
        }
        let cmd = match polar_errors(&pose, goal, 0.0, &FormationSlot::on_point()) {
            Ok(e) => sfkc_command(&e, &gains, 0.0, &limits).expect("default gains are stable"),
            Err(_) => break,
        };
        pose = integrate_pose(&pose, &cmd.as_body_velocity(), dt).expect("finite pose");
    }
    let (fast, time) = within(start.elapsed(), 1.0);
    let reached = first_inside.map_or("never".to_string(), |t| format!("{t:.1} s"));
    outcome(
        first_inside.is_some() && !left_after && fast,
        format!("rho < {CONVERGED_RHO_M} m from {reached} (horizon {CONVERGENCE_HORIZON_S} s), left afterwards: {left_after}, final rho {last_rho:.3e} m, {time}"),
    )
}

fn formation_reproduction() -> Outcome {
    let start = Instant::now();
    let scenario = bundled("waypoint_v3.json");
    let trace = run_simulation(&scenario, None).expect("run");
    let m = compute_metrics(&trace, &scenario).expect("metrics");
    let f = m.followers.expect("followers present");
    let (fast, time) = within(start.elapsed(), 10.0);
    outcome(
        f.mean_m <= FOLLOWER_MEAN_MAX_M && f.std_m <= FOLLOWER_STD_MAX_M && fast,
        format!(
            "follower slot error after {} s: mean {:.2} m (<= {FOLLOWER_MEAN_MAX_M}), std {:.2} m (<= {FOLLOWER_STD_MAX_M}), {time}",
            scenario.transient_s, f.mean_m, f.std_m
        ),
    )
}

fn target_reproduction() -> Outcome {
    let start = Instant::now();
    let scenario = bundled("target_v4.json");
    let trace = run_simulation(&scenario, None).expect("run");
    let m = compute_metrics(&trace, &scenario).expect("metrics");
    let l = m.leader.expect("leader present");
    let (lo, hi) = TARGET_LEADER_MEAN_M;
    let (fast, time) = within(start.elapsed(), 10.0);
    outcome(
        (lo..=hi).contains(&l.mean_m) && fast,
        format!("leader error to target: mean {:.2} m (in [{lo}, {hi}]), std {:.2} m, {time}", l.mean_m, l.std_m),
    )
}

fn random_boids(rng: &mut ChaCha8Rng, n: usize) -> Vec<BoidState> {
    (0..n)
        .map(|_| {
            BoidState::new(
                Vec3::planar(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)),
                Vec3::planar(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
            )
        })
        .collect()
}

fn boids_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let attraction_only = BoidsParams { delta: 0.0, k_r: 0.0, k_m: 0.0, k_a: 1.0, v_max: 1e9, ..BoidsParams::default() };
    let mut drift: f64 = 0.0;
    let mut swarm = random_boids(&mut rng, 9);
    for _ in 0..200 {
        let before = swarm.iter().map(|s| s.position).sum::<Vec3>() / swarm.len() as f64;
        swarm = boids_step_swarm_with(&swarm, &attraction_only, None, 0.1, Exec::Sequential).expect("step");
        let after = swarm.iter().map(|s| s.position).sum::<Vec3>() / swarm.len() as f64;
        drift = drift.max((after - before).norm());
    }

    let mut attraction_sum: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(2..16);
        let positions: Vec<Vec3> = random_boids(&mut rng, n).iter().map(|s| s.position).collect();
        let total: Vec3 = (0..n).map(|i| attraction_velocity(i, &positions).expect("n >= 2")).sum();
        attraction_sum = attraction_sum.max(total.norm());
    }

    let params = BoidsParams::default();
    let mut permutation_failures = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..12);
        let swarm = random_boids(&mut rng, n);
        let waypoint = Some(Vec3::planar(rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0)));
        let mut order: Vec<usize> = (0..n).collect();
        order.reverse();
        order.rotate_left(rng.random_range(0..n));
        let permuted: Vec<BoidState> = order.iter().map(|&i| swarm[i]).collect();
        let a = boids_step_swarm_with(&swarm, &params, waypoint, 0.1, Exec::Sequential).expect("step");
        let b = boids_step_swarm_with(&permuted, &params, waypoint, 0.1, Exec::Sequential).expect("step");
        let mismatch = order
            .iter()
            .enumerate()
            .any(|(k, &i)| (a[i].position - b[k].position).norm() > 1e-9 || (a[i].velocity - b[k].velocity).norm() > 1e-9);
        permutation_failures += usize::from(mismatch);
    }
    outcome(
        drift <= CENTROID_DRIFT_MAX_M && attraction_sum <= ATTRACTION_SUM_MAX && permutation_failures == 0,
        format!(
            "centroid drift {drift:.2e} m/step (<= {CENTROID_DRIFT_MAX_M:e}), |sum v_a| {attraction_sum:.2e} (<= {ATTRACTION_SUM_MAX:e}), permutation mismatches {permutation_failures}/100"
        ),
    )
}

fn boids_reproduction() -> Outcome {
    let scenario = bundled("boids_v4.json");
    let trace = run_simulation(&scenario, None).expect("run");
    let m = compute_metrics(&trace, &scenario).expect("metrics");
    outcome(
        m.centre.mean_m <= BOIDS_CENTRE_MEAN_MAX_M,
        format!(
            "swarm-centre error after {} s: mean {:.2} m (<= {BOIDS_CENTRE_MEAN_MAX_M}), std {:.2} m",
            scenario.transient_s, m.centre.mean_m, m.centre.std_m
        ),
    )
}

/// Midpoint rule over `[0, max distance]`.
fn riemann_entropy(positions: &[Vec3]) -> f64 {
    let matrix = pairwise_distances(positions);
    let top = (0..matrix.len()).flat_map(|i| matrix.row(i).to_vec()).fold(0.0, f64::max);
    let steps = (top / QUADRATURE_STEP_M).ceil() as usize;
    (0..steps).map(|k| cluster_entropy_at((k as f64 + 0.5) * QUADRATURE_STEP_M, &matrix) * QUADRATURE_STEP_M).sum()
}

fn entropy_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_quadrature: f64 = 0.0;
    let mut worst_scale: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..=12);
        let positions: Vec<Vec3> = (0..n).map(|_| Vec3::planar(rng.random_range(0.0..4.0), rng.random_range(0.0..4.0))).collect();
        let exact = total_entropy(&positions).s;
        worst_quadrature = worst_quadrature.max((exact - riemann_entropy(&positions)).abs() / exact);
        for alpha in [0.5, 2.0, 10.0] {
            let scaled: Vec<Vec3> = positions.iter().map(|&p| p * alpha).collect();
            worst_scale = worst_scale.max((total_entropy(&scaled).s - alpha * exact).abs() / (alpha * exact));
        }
    }
    let pair = total_entropy(&[Vec3::ZERO, Vec3::planar(4.0, 0.0)]).s;
    let line = total_entropy(&[Vec3::ZERO, Vec3::planar(1.0, 0.0), Vec3::planar(2.0, 0.0)]).s;
    // three collinear agents: log2(3) bits up to 1 m; up to 2 m the two end
    // agents each see two thirds of the swarm and the middle one sees all
    let line_hand = 3f64.log2() + (4.0 / 3.0) * 1.5f64.log2();
    let hand_ok = (pair - 4.0).abs() <= HAND_ENTROPY_TOL && (line - line_hand).abs() <= HAND_ENTROPY_TOL;
    outcome(
        worst_quadrature <= QUADRATURE_REL_TOL && worst_scale <= SCALE_REL_TOL && hand_ok,
        format!(
            "quadrature rel err {worst_quadrature:.2e} (<= {QUADRATURE_REL_TOL:e}), scale rel err {worst_scale:.2e} (<= {SCALE_REL_TOL:e}), S(pair at 4 m) = {pair:.9}, S(0/1/2 m) = {line:.9} (hand {line_hand:.9})"
        ),
    )
}

fn rpso_convergence() -> Outcome {
    let scenario = bundled("rpso_static_v4.json");
    let (model, _) = scenario.target().expect("target mission");
    let streams = Substreams::new(scenario.seed);
    let target = airswarm::mission::target_position(&model, 0.0, &streams).horizontal();
    let mut swarm: Vec<ParticleState> = scenario.initial_poses().iter().map(|p| ParticleState::at(p.position.horizontal())).collect();
    let centre = |s: &[ParticleState]| s.iter().map(|p| p.position).sum::<Vec3>() / s.len() as f64;
    let initial = (centre(&swarm) - target).norm();
    let mut best_so_far = f64::NEG_INFINITY;
    let mut drops = 0;
    let steps = (RPSO_HORIZON_S / scenario.dt_s).round() as u64;
    for k in 0..steps {
        let out = rpso_step_with(&swarm, target, &scenario.rpso, &streams, k, scenario.dt_s, Exec::Sequential).expect("step");
        let best = out.swarm.iter().map(|p| p.best_fitness).fold(f64::NEG_INFINITY, f64::max);
        if k > 0 && best < best_so_far {
            drops += 1;
        }
        best_so_far = best;
        swarm = out.swarm;
    }
    let last = (centre(&swarm) - target).norm();
    outcome(
        drops == 0 && last <= RPSO_FINAL_FRACTION * initial,
        format!(
            "{} robots, best-fitness drops {drops}, centre distance {initial:.1} m -> {last:.2} m (<= {:.1} m) after {RPSO_HORIZON_S} s",
            swarm.len(),
            RPSO_FINAL_FRACTION * initial
        ),
    )
}

fn rpso_hand_trace() -> Outcome {
    let params = RpsoParams { v_max: 100.0, ..RpsoParams::default() };
    let swarm =
        [ParticleState { velocity: Vec3::planar(1.0, 0.0), ..ParticleState::at(Vec3::ZERO) }, ParticleState::at(Vec3::planar(30.0, 40.0))];
    let target = Vec3::planar(100.0, 0.0);
    let out = rpso_step(&swarm, target, &params, &PinnedDraws([1.0; 3]), 0, 1.0).expect("step");

    // By hand: the robots are 50 m apart (beyond the 10 m collision
    // threshold), so S = 1 bit over 50 m. Robot 1 is nearer the target and
    // leads. Both personal bests become the current positions.
    let gamma_s2 = (-(50.0f64 * 50.0) / (50.0 * 50.0)).exp();
    let f0 = gamma_s2 + (-(100.0f64 * 100.0) / (50.0 * 50.0)).exp();
    let f1 = gamma_s2 + (-(70.0f64 * 70.0 + 40.0 * 40.0) / (50.0 * 50.0)).exp();
    let v0 = Vec3::planar(0.7 * 1.0 + 1.4 * 30.0, 1.4 * 40.0);
    let expected_positions = [v0, Vec3::planar(30.0, 40.0)];
    let ok = out.entropy == 50.0
        && out.leader == 1
        && (out.fitness[0] - f0).abs() <= 1e-15
        && (out.fitness[1] - f1).abs() <= 1e-15
        && out.swarm[0].velocity == v0
        && out.swarm[1].velocity == Vec3::ZERO
        && out.swarm.iter().zip(expected_positions).all(|(p, x)| p.position == x)
        && out.swarm.iter().zip(&swarm).all(|(p, s)| p.best_position == s.position);
    outcome(
        ok,
        format!(
            "S = {} (hand 50), leader {} (hand 1), v0 = ({}, {}) (hand (42.7, 56)), v1 = ({}, {}) (hand (0, 0))",
            out.entropy, out.leader, out.swarm[0].velocity.n, out.swarm[0].velocity.e, out.swarm[1].velocity.n, out.swarm[1].velocity.e
        ),
    )
}

fn cli_determinism() -> Outcome {
    let mut scenarios: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .expect("scenario dir")
        .map(|e| e.expect("entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    scenarios.sort();
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut differing = Vec::new();
    for run in ["a", "b"] {
        let status = Command::new(env!("CARGO_BIN_EXE_airswarm"))
            .arg("run")
            .args(&scenarios)
            .args(["--seed", "7", "--out"])
            .arg(tmp.path().join(run))
            .output()
            .expect("spawn cli");
        if !status.status.success() {
            return outcome(false, format!("run {run} failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
    }
    for path in &scenarios {
        let stem = path.file_stem().expect("stem");
        for artifact in ["trace.csv", "trace.svg"] {
            let read = |run: &str| std::fs::read(tmp.path().join(run).join(stem).join(artifact)).expect("artifact");
            if read("a") != read("b") {
                differing.push(format!("{}/{artifact}", stem.to_string_lossy()));
            }
        }
    }
    outcome(
        differing.is_empty(),
        format!("{} bundled scenarios run twice with --seed 7, differing artifacts: {differing:?}", scenarios.len()),
    )
}

/// First index with the smallest gap, by exhaustive comparison.
fn brute_force_argmin(u: f64, airspeeds: &[f64]) -> usize {
    let gaps: Vec<f64> = airspeeds.iter().map(|v| (u - v).abs()).collect();
    let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    gaps.iter().position(|&g| g == min).expect("non-empty")
}

fn trim_scan() -> Outcome {
    let default_table = TrimTable::default();
    // exactly representable trim points so that midpoints are true ties
    let dyadic = TrimTable {
        airspeeds: (0..74).map(|i| 0.25 * i as f64).collect(),
        gains: (0..74).map(|i| TrimGains { tau_u: 1.0 + i as f64, tau_r: 1.0 }).collect(),
    };
    let mut mismatches = 0;
    let mut ties = 0;
    for table in [&default_table, &dyadic] {
        let top = table.airspeeds[table.airspeeds.len() - 1];
        for k in 0..10_000 {
            let u = -1.0 + (top + 2.0) * k as f64 / 9_999.0;
            let u = if std::ptr::eq(table, &dyadic) && k % 2 == 0 { 0.125 * (k / 2 % 150) as f64 } else { u };
            let expected = brute_force_argmin(u, &table.airspeeds);
            let (index, gains) = trim_minimization(u, table).expect("non-empty table");
            if index != expected || gains != table.gains[expected] {
                mismatches += 1;
            }
            let gap = (u - table.airspeeds[expected]).abs();
            if table.airspeeds.get(expected + 1).is_some_and(|v| (u - v).abs() == gap) {
                ties += 1;
            }
        }
    }
    outcome(
        mismatches == 0 && ties > 0 && default_table.airspeeds.len() == 74,
        format!(
            "2 tables x 10000 queries against brute-force argmin: {mismatches} mismatches, {ties} exact ties resolved to the lower index"
        ),
    )
}

type Check = (&'static str, fn() -> Outcome);

fn main() {
    let checks: [Check; 11] = [
        ("gain stability region", gain_stability),
        ("feedback convergence to a point goal", sfkc_convergence),
        ("V formation on the waypoint route", formation_reproduction),
        ("leader tracking a scripted target", target_reproduction),
        ("Boids algebraic invariants", boids_invariants),
        ("Boids swarm on the waypoint route", boids_reproduction),
        ("social entropy oracles", entropy_oracles),
        ("RPSO monotone best and convergence", rpso_convergence),
        ("RPSO two-robot hand trace", rpso_hand_trace),
        ("CLI artifact determinism", cli_determinism),
        ("trim point selection scan", trim_scan),
    ];
    let mut failed = 0;
    for (k, (name, check)) in checks.iter().enumerate() {
        let result = check();
        failed += usize::from(!result.pass);
        println!("{} {:>2} {name}: {}", if result.pass { "PASS" } else { "FAIL" }, k + 1, result.detail);
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
