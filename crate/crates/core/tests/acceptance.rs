//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::io::Write as _;
use std::time::{Duration, Instant};

use etmg_core::case_study::{reference_model, reference_thermal, CaseStudy, CONSUMER_EDGE, HEAT_PUMP_EDGE};
use etmg_core::discretize::zoh_discretize;
use etmg_core::electrical::{assemble_ptdf, line_flows, ElectricalNetwork, UnitRole};
use etmg_core::graph::DirectedGraph;
use etmg_core::mpc::{default_solver_settings, MpcBuilder, Predictor, CONSTRAINT_TOL};
use etmg_core::qp::{kkt_residuals, solve_qp, solve_qp_from, QpProblem, QpSettings, QpStatus};
use etmg_core::scenario::{preset, summarize, PreparedScenario, RunSummary};
use etmg_core::thermal::assemble_continuous_thermal;
use etmg_core::{ScenarioConfig, SimulationTrace};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EQUILIBRIUM_DRIFT_TOL: f64 = 1e-9;
const CONSERVATION_TOL: f64 = 1e-8;
const ZOH_TOL: f64 = 1e-6;
const RK4_STEP: f64 = 0.1;
const PTDF_TOL: f64 = 1e-10;
const KKT_TOL: f64 = 1e-6;
const GRID_STEP: f64 = 1e-3;
const GRID_TOL: f64 = 2e-3;
const CONDENSE_TOL: f64 = 1e-10;
const TRACKING_BAND: f64 = 0.5;
const SUPPLY_SETPOINT: f64 = 90.0;
const RELAXED_LOWER: f64 = 85.5;
const SCENARIO_RUNTIME: Duration = Duration::from_secs(120);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn thermal_range(cs: &CaseStudy) -> std::ops::Range<usize> {
    let d = reference_model(cs, 1.0).unwrap().dims;
    d.n_ess..d.n_ess + d.n_thermal()
}

fn equilibrium_fixed_point() -> Outcome {
    let start = Instant::now();
    let cs = CaseStudy::default();
    let model = reference_model(&cs, 1.0).unwrap();
    let d = model.dims;
    let mut x = DVector::zeros(d.n_state());
    x.rows_mut(d.n_ess, d.n_thermal()).fill(10.0);
    let u = DVector::zeros(d.n_control());
    let mut d_t = DVector::zeros(d.n_thermal_dist());
    d_t[d.n_demand] = 10.0;
    let d_e = DVector::zeros(d.n_elec_dist());
    let mut worst = 0.0f64;
    for _ in 0..96 {
        let next = model.step(&x, &u, &d_t, &d_e).unwrap().state;
        worst = worst.max((&next - &x).amax());
        x = next;
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= EQUILIBRIUM_DRIFT_TOL && elapsed < Duration::from_secs(1),
        format!("max per-step drift {worst:.2e} K (tol {EQUILIBRIUM_DRIFT_TOL:e}), {elapsed:.2?}"),
    )
}

fn energy_conservation() -> Outcome {
    let cs = CaseStudy::default();
    let model = reference_model(&cs, 0.0).unwrap();
    let d = model.dims;
    let range = thermal_range(&cs);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let mut x = DVector::zeros(d.n_state());
        for i in range.clone() {
            x[i] = rng.gen_range(55.0..95.0);
        }
        let energy =
            |x: &DVector<f64>| (0..d.n_thermal()).map(|i| model.thermal_inertia[i] * x[d.n_ess + i]).sum::<f64>();
        let e0 = energy(&x);
        let u = DVector::zeros(d.n_control());
        let d_t = DVector::zeros(d.n_thermal_dist());
        let d_e = DVector::zeros(d.n_elec_dist());
        for _ in 0..96 {
            x = model.step(&x, &u, &d_t, &d_e).unwrap().state;
            worst = worst.max(((energy(&x) - e0) / e0).abs());
        }
    }
    outcome(worst <= CONSERVATION_TOL, format!("max relative drift {worst:.2e} (tol {CONSERVATION_TOL:e})"))
}

fn rk4(a: &DMatrix<f64>, forcing: &DVector<f64>, x: &DVector<f64>, span: f64, h: f64) -> DVector<f64> {
    let f = |x: &DVector<f64>| a * x + forcing;
    let mut x = x.clone();
    let steps = (span / h).round() as usize;
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (h / 2.0)));
        let k3 = f(&(&x + &k2 * (h / 2.0)));
        let k4 = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

fn discretization_oracle() -> Outcome {
    let cs = CaseStudy::default();
    let net = reference_thermal(&cs, 1.0).unwrap();
    let cont = assemble_continuous_thermal(&net, &[HEAT_PUMP_EDGE], &[CONSUMER_EDGE]).unwrap();
    let sys = zoh_discretize(&cont.a, &cont.b, &cont.e, cs.dt_seconds).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = cont.state_dim();
    let mut x = DVector::from_iterator(n, (0..n).map(|_| rng.gen_range(55.0..95.0)));
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let u = DVector::from_element(1, rng.gen_range(0.0..3.0e6));
        let d = DVector::from_vec(vec![-rng.gen_range(0.0..3.0e6), rng.gen_range(-10.0..20.0)]);
        let zoh = &sys.a * &x + &sys.b * &u + &sys.e * &d;
        let forcing = &cont.b * &u + &cont.e * &d;
        let reference = rk4(&cont.a, &forcing, &x, cs.dt_seconds, RK4_STEP);
        worst = worst.max((&zoh - &reference).amax());
        x = reference;
    }
    outcome(worst <= ZOH_TOL, format!("max discrepancy {worst:.2e} K per sample (tol {ZOH_TOL:e})"))
}

fn grounded_laplacian_flows(g: &DirectedGraph, a: &[f64], p: &DVector<f64>) -> DVector<f64> {
    let n = g.node_count();
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for (j, &(s, t)) in g.edges().iter().enumerate() {
        lap[(s, s)] += a[j];
        lap[(t, t)] += a[j];
        lap[(s, t)] -= a[j];
        lap[(t, s)] -= a[j];
    }
    let reduced = lap.view((0, 0), (n - 1, n - 1)).clone_owned();
    let theta_red = reduced.lu().solve(&p.rows(0, n - 1).clone_owned()).unwrap();
    let mut theta = DVector::zeros(n);
    theta.rows_mut(0, n - 1).copy_from(&theta_red);
    // diag(a) Fᵀ θ with +1 at the sink
    DVector::from_iterator(
        g.edge_count(),
        g.edges().iter().enumerate().map(|(j, &(s, t))| a[j] * (theta[t] - theta[s])),
    )
}

fn ptdf_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(2..=8);
        let mut edges = Vec::new();
        for child in 1..n {
            let parent = rng.gen_range(0..child);
            edges.push(if rng.gen_bool(0.5) { (parent, child) } else { (child, parent) });
        }
        for _ in 0..rng.gen_range(0..6) {
            let (s, t) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if s != t {
                edges.push((s, t));
            }
        }
        let a: Vec<f64> = (0..edges.len()).map(|_| rng.gen_range(0.1..10.0)).collect();
        let g = DirectedGraph::new(n, edges).unwrap();
        let mut roles = vec![UnitRole::Load; n];
        roles[0] = UnitRole::Pcc;
        let net = ElectricalNetwork::new(g.clone(), a.clone(), roles).unwrap();
        let ptdf = assemble_ptdf(&net).unwrap();
        let mut p = DVector::from_iterator(n, (0..n).map(|_| rng.gen_range(-1.0..1.0)));
        let mean = p.mean();
        p.add_scalar_mut(-mean);
        let f = line_flows(&ptdf, &p).unwrap();
        let oracle = grounded_laplacian_flows(&g, &a, &p);
        worst = worst.max((&f - &oracle).norm() / oracle.norm().max(1e-12));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= PTDF_TOL && elapsed < Duration::from_secs(5),
        format!("max relative error {worst:.2e} (tol {PTDF_TOL:e}) over 200 graphs, {elapsed:.2?}"),
    )
}

fn random_box_qp(rng: &mut ChaCha8Rng, n: usize) -> QpProblem {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let h = m.transpose() * &m + DMatrix::identity(n, n) * 0.1;
    let g = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    let lb = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..0.0));
    let ub = DVector::from_fn(n, |_, _| rng.gen_range(0.0..1.0));
    QpProblem::boxed(h, g, lb, ub).unwrap()
}

fn grid_search(p: &QpProblem) -> DVector<f64> {
    let steps = |i: usize| ((p.ub[i] - p.lb[i]) / GRID_STEP).floor() as usize;
    let mut best = (f64::INFINITY, DVector::zeros(2));
    for i in 0..=steps(0) {
        for j in 0..=steps(1) {
            let x = DVector::from_vec(vec![p.lb[0] + i as f64 * GRID_STEP, p.lb[1] + j as f64 * GRID_STEP]);
            let f = p.objective(&x);
            if f < best.0 {
                best = (f, x);
            }
        }
    }
    best.1
}

fn qp_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let settings = QpSettings::default();
    let mut worst_kkt = 0.0f64;
    let mut not_optimal = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=50);
        let p = random_box_qp(&mut rng, n);
        let s = solve_qp(&p, &settings).unwrap();
        if s.status != QpStatus::Optimal {
            not_optimal += 1;
        }
        worst_kkt = worst_kkt.max(kkt_residuals(&p, &s).max());
    }
    let mut worst_grid = 0.0f64;
    for _ in 0..5 {
        let p = random_box_qp(&mut rng, 2);
        let s = solve_qp(&p, &settings).unwrap();
        worst_grid = worst_grid.max((&s.x - grid_search(&p)).amax());
    }
    let elapsed = start.elapsed();
    outcome(
        not_optimal == 0 && worst_kkt <= KKT_TOL && worst_grid <= GRID_TOL && elapsed < Duration::from_secs(10),
        format!(
            "max KKT residual {worst_kkt:.2e} (tol {KKT_TOL:e}), {not_optimal} non-optimal, \
             max grid distance {worst_grid:.2e} (tol {GRID_TOL:e}), {elapsed:.2?}"
        ),
    )
}

fn condensation_equivalence() -> Outcome {
    let cs = CaseStudy::default();
    let model = reference_model(&cs, 1.0).unwrap();
    let d = model.dims;
    let (nx, nu, nd) = (d.n_state(), d.n_control(), d.n_thermal_dist());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for horizon in 1..=8 {
        let pred = Predictor::new(&model, horizon);
        let mut x =
            DVector::from_fn(nx, |i, _| if i < d.n_ess { rng.gen_range(0.0..5.0) } else { rng.gen_range(55.0..95.0) });
        let u = DVector::from_fn(horizon * nu, |_, _| rng.gen_range(-1.2..1.2));
        let dist =
            DVector::from_fn(horizon * nd, |i, _| if i % nd < d.n_demand { -rng.gen_range(0.0..3.0) } else { 10.0 });
        let stacked = pred.predict(&x, &u, &dist);
        for k in 0..horizon {
            x = &model.a * &x + &model.b * u.rows(k * nu, nu) + &model.e * dist.rows(k * nd, nd);
            let scale = x.amax().max(1.0);
            worst = worst.max((stacked.rows(k * nx, nx) - &x).amax() / scale);
        }
    }
    outcome(worst <= CONDENSE_TOL, format!("max relative mismatch {worst:.2e} (tol {CONDENSE_TOL:e}) for N = 1..8"))
}

struct Run {
    scenario: PreparedScenario,
    trace: SimulationTrace,
    summary: RunSummary,
    elapsed: Duration,
}

fn run_preset(name: &str) -> Run {
    let cfg = ScenarioConfig::from_toml(preset(name).unwrap()).unwrap();
    let scenario = cfg.prepare(None, None).unwrap();
    let start = Instant::now();
    let trace = scenario.run().unwrap();
    let elapsed = start.elapsed();
    let summary = summarize(&scenario.label, &trace, &scenario.model);
    Run { scenario, trace, summary, elapsed }
}

fn scenario_one_tracking(run: &Run) -> Outcome {
    let n_ess = run.scenario.model.dims.n_ess;
    let worst = run.trace.steps.iter().map(|s| (s.state[n_ess] - SUPPLY_SETPOINT).abs()).fold(0.0, f64::max);
    outcome(
        worst <= TRACKING_BAND,
        format!(
            "max |T_e1 - {SUPPLY_SETPOINT}| = {worst:.4} K over all {} steps (band {TRACKING_BAND})",
            run.trace.steps.len()
        ),
    )
}

fn directional_reproduction(one: &Run, two: &Run) -> Outcome {
    let (a, b) = (&one.summary, &two.summary);
    let grid = b.grid_energy < a.grid_energy;
    let variance = b.hp_variance < a.hp_variance;
    let capacity = b.used_ess_capacity < a.used_ess_capacity;
    let dip = b.min_supply_temperature < SUPPLY_SETPOINT && b.min_supply_temperature >= RELAXED_LOWER - CONSTRAINT_TOL;
    let v1 = one.trace.violations(&one.scenario.model, &one.scenario.mpc).max();
    let v2 = two.trace.violations(&two.scenario.model, &two.scenario.mpc).max();
    let feasible = v1 <= CONSTRAINT_TOL && v2 <= CONSTRAINT_TOL;
    let fast = one.elapsed < SCENARIO_RUNTIME && two.elapsed < SCENARIO_RUNTIME;
    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    outcome(
        grid && variance && capacity && dip && feasible && fast,
        format!(
            "(a) grid {:.4} -> {:.4} MWh {}; (b) HP variance {:.6} -> {:.6} MW^2 {}; \
             (c) used ESS {:.4} -> {:.4} MWh {}; (d) min T_e1 {:.4} degC {}; \
             (e) max violation {:.1e}/{:.1e} {}; runtime {:.1?}/{:.1?} {}",
            a.grid_energy,
            b.grid_energy,
            mark(grid),
            a.hp_variance,
            b.hp_variance,
            mark(variance),
            a.used_ess_capacity,
            b.used_ess_capacity,
            mark(capacity),
            b.min_supply_temperature,
            mark(dip),
            v1,
            v2,
            mark(feasible),
            one.elapsed,
            two.elapsed,
            mark(fast)
        ),
    )
}

fn relaxation_monotonicity() -> Outcome {
    let cfg = ScenarioConfig::from_toml(preset("scenario_II").unwrap()).unwrap();
    let s = cfg.prepare(None, None).unwrap();
    let d = s.model.dims;
    let mut tight = s.mpc.clone();
    for lo in &mut tight.temperature_lower {
        if *lo == RELAXED_LOWER {
            *lo = SUPPLY_SETPOINT;
        }
    }
    let relaxed = &s.mpc;
    let bt = MpcBuilder::new(&s.model, &tight).unwrap();
    let br = MpcBuilder::new(&s.model, relaxed).unwrap();
    let settings = default_solver_settings();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for _ in 0..10 {
        let target = rng.gen_range(90.5..94.0);
        let (_, thermal) = s.model.steady_state_for_target(&s.forecast.d_t[0], 0, target).unwrap();
        let mut x0 = DVector::zeros(d.n_state());
        x0[0] = rng.gen_range(1.0..4.0);
        x0.rows_mut(d.n_ess, d.n_thermal()).copy_from(&thermal);
        let u_prev = vec![rng.gen_range(-0.8..-0.3)];
        let mut costs = [0.0; 2];
        for (slot, b) in [&bt, &br].into_iter().enumerate() {
            let qp = b.build(&x0, &u_prev, &s.forecast, 0).unwrap();
            let sol = solve_qp_from(&qp.problem, &settings, None).unwrap();
            if sol.status != QpStatus::Optimal {
                failures += 1;
            }
            costs[slot] = b.horizon_cost(&x0, &u_prev, &s.forecast, 0, &sol.x);
        }
        worst = worst.max((costs[1] - costs[0]) / costs[0].abs().max(1.0));
    }
    outcome(
        failures == 0 && worst <= 1e-6,
        format!("max relative cost increase {worst:.2e} (tol 1e-6) over 10 initial states, {failures} solver failures"),
    )
}

#[test]
fn acceptance() {
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "equilibrium fixed point", equilibrium_fixed_point()),
        (2, "energy conservation", energy_conservation()),
        (3, "discretization oracle", discretization_oracle()),
        (4, "PTDF oracle", ptdf_oracle()),
        (5, "QP correctness", qp_correctness()),
        (6, "condensation equivalence", condensation_equivalence()),
    ];
    let one = run_preset("scenario_I");
    let two = run_preset("scenario_II");
    results.push((7, "scenario I temperature tracking", scenario_one_tracking(&one)));
    results.push((8, "case-study directional reproduction", directional_reproduction(&one, &two)));
    results.push((9, "relaxation monotonicity", relaxation_monotonicity()));

    let mut failed = Vec::new();
    let mut out = std::io::stdout().lock();
    for (id, name, o) in &results {
        let _ = writeln!(out, "{} criterion {id} ({name}): {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed.push(*id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
