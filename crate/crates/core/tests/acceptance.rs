//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use fdl_core::disc::{self, Field, Grid};
use fdl_core::estimates::{self, loglog_fit};
use fdl_core::exact::{self, MajorantParams, ZkbParams};
use fdl_core::exhaust::{self, ExhaustionPlan, InitialDatum, Window};
use fdl_core::norms::{dot, FinslerEvaluator, NormSpec};
use fdl_core::stepper::{self, RunResult, StepConfig, TestBump};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn evaluator(spec: &str, dim: usize) -> FinslerEvaluator {
    FinslerEvaluator::new(NormSpec::parse(spec, dim).unwrap()).unwrap()
}

fn c1_norm_identities() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut mono = f64::INFINITY;
    let mut pass = true;
    for spec in ["euclidean", "pnorm:1.5", "pnorm:4", "aniso:[[2,1],[1,2]]"] {
        let r = evaluator(spec, 2).verify_identities(10_000, 7);
        pass &= r.passes(1e-10, 1e-12);
        worst = worst
            .max(r.max_euler_residual)
            .max(r.max_dual_grad_residual)
            .max(r.max_duality_excess)
            .max(r.max_flux_dual_residual);
        mono = mono.min(r.min_monotonicity);
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 5.0;
    outcome(pass, format!("max residual {worst:.2e}, min monotonicity {mono:.2e}, {secs:.2}s"))
}

struct ZkbRun {
    h: f64,
    grid: Grid,
    result: RunResult,
    error: f64,
}

const ZKB_Q: f64 = 1.5;

fn zkb_params() -> ZkbParams {
    ZkbParams::new(ZKB_Q, 1, 1.0 / 12.0).unwrap()
}

fn zkb_run(h: f64, dt: f64) -> ZkbRun {
    let ev = evaluator("euclidean", 1);
    let z = zkb_params();
    let grid = Grid::with_padding(2.0, h, 3, &ev).unwrap();
    let u0 = grid.sample(|x| z.eval(&ev, x, 1.0).unwrap());
    let cfg = StepConfig {
        dt0: dt,
        t_start: 1.0,
        t_end: 2.0,
        window_radius: Some(1.0),
        ..StepConfig::default()
    };
    let result = stepper::run(&grid, &ev, ZKB_Q, &disc::beta_field(ZKB_Q, &u0), &cfg).unwrap();
    let fin = result.final_snapshot();
    let exact = grid.sample(|x| z.eval(&ev, x, fin.t).unwrap());
    let diff: f64 = fin.u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum();
    let norm: f64 = exact.iter().map(|b| b.abs()).sum();
    ZkbRun { h, grid, result, error: diff / norm }
}

fn c2_zkb_convergence(runs: &[ZkbRun], secs: f64) -> Outcome {
    let (e1, e2) = (runs[0].error, runs[1].error);
    let order = (e1 / e2).ln() / (runs[0].h / runs[1].h).ln();
    let pass = e1 <= 0.04 && e2 <= 0.02 && order >= 0.8 && secs < 120.0;
    outcome(pass, format!("L1 errors {e1:.3e} (h=1/64), {e2:.3e} (h=1/128), order {order:.2}, {secs:.1}s"))
}

fn c3_interface_law(run: &ZkbRun) -> Outcome {
    let ev = evaluator("euclidean", 1);
    let sr = estimates::support_radius(&run.result, &run.grid, &ev, None);
    let beta = zkb_params().beta;
    let slope = sr.fit.map(|f| f.slope).unwrap_or(f64::NAN);
    outcome((slope - beta).abs() <= 0.05 * beta, format!("support slope {slope:.4} vs beta {beta:.4}"))
}

fn c4_mass(runs: &[ZkbRun]) -> Outcome {
    let z = zkb_params();
    let mut worst: f64 = 0.0;
    let mut margin = f64::INFINITY;
    for run in runs {
        let m = &run.result.monitors;
        let m0 = m[0].mass;
        for x in m {
            worst = worst.max((x.mass - m0).abs() / m0);
        }
        margin = margin.min(run.grid.radius() - z.support_radius(2.0).unwrap() - 3.0 * run.h);
    }
    outcome(worst <= 1e-6 && margin > 0.0, format!("max relative drift {worst:.2e}, support margin {margin:.3}"))
}

struct FdeRun {
    grid: Grid,
    result: RunResult,
    secs: f64,
}

fn fde_run() -> FdeRun {
    let ev = evaluator("euclidean", 2);
    let h = 1.0 / 32.0;
    let grid = Grid::with_padding(4.0, h, 2, &ev).unwrap();
    let datum = InitialDatum::DiracBump { mass: 1.0, center: [0.0, 0.0], width: 2.0 * h };
    let v0 = exhaust::mollify(&datum, &ev, 3.0, &grid, 0.0).unwrap();
    let cfg = StepConfig {
        dt0: 1e-4,
        t_end: 0.5,
        dt_growth: 1.05,
        save_every: 1_000_000,
        window_radius: Some(1.0),
        ..StepConfig::default()
    };
    let start = Instant::now();
    let result = stepper::run(&grid, &ev, 3.0, &v0, &cfg).unwrap();
    FdeRun { grid, result, secs: start.elapsed().as_secs_f64() }
}

fn c5_fde_smoothing(run: &FdeRun) -> Outcome {
    let ev = evaluator("euclidean", 2);
    let times = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5];
    let rep = estimates::fde_report(&run.result, &run.grid, &ev, 3.0, 1.0, 1.0, &times).unwrap();
    let c = rep.get("sup_slope").unwrap();
    let pass = c.pass && run.result.status == stepper::RunStatus::Completed && run.secs < 600.0;
    outcome(pass, format!("sup-norm slope {:.4} vs {:.4}, {:.0}s", c.value, c.expected, run.secs))
}

fn c6_vanishing_integral(run: &FdeRun) -> Outcome {
    let m = &run.result.monitors;
    let t: Vec<f64> = m.iter().map(|x| x.t).collect();
    let grad: Vec<f64> = m.iter().map(|x| x.window.unwrap().grad_l1).collect();
    let mut g = vec![0.0];
    for k in 1..t.len() {
        g.push(g[k - 1] + 0.5 * (t[k] - t[k - 1]) * (grad[k] + grad[k - 1]));
    }
    let early = [0.003125, 0.00625, 0.0125, 0.025, 0.05];
    let ge: Vec<f64> = early
        .iter()
        .map(|&s| {
            let k = t.partition_point(|&x| x < s).min(t.len() - 1);
            let th = (s - t[k - 1]) / (t[k] - t[k - 1]);
            g[k - 1] + th * (g[k] - g[k - 1])
        })
        .collect();
    let monotone = ge.windows(2).all(|w| w[1] > w[0]) && ge[0] > 0.0 && g.windows(2).all(|w| w[1] >= w[0]);
    let slope = loglog_fit(&early, &ge).map(|f| f.slope).unwrap_or(f64::NAN);
    let a2 = exhaust::verify_a2(std::slice::from_ref(&run.result), 1.0, &early).unwrap();
    let pass = monotone && (0.4..=1.1).contains(&slope) && a2.pass;
    let a2_slope = a2.fit.map(|f| f.slope).unwrap_or(f64::NAN);
    outcome(pass, format!("gradient integral slope {slope:.3} (A2 with |v|: {a2_slope:.3}), monotone {monotone}"))
}

fn c7_blowup_scaling() -> Outcome {
    let ev = evaluator("euclidean", 1);
    let grid = Grid::with_padding(16.0, 1.0 / 16.0, 2, &ev).unwrap();
    let cfg = StepConfig {
        dt0: 1e-4,
        t_end: 0.2,
        window_radius: Some(1.0),
        blowup_growth: Some(10.0),
        save_every: 1_000_000,
        ..StepConfig::default()
    };
    let start = Instant::now();
    let scan = estimates::blowup_scan(&[1.0, 2.0, 4.0], 1.5, &ev, &grid, 0.1, &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let c = scan.report.get("blowup_slope").unwrap();
    let censored = scan.t_star.iter().filter(|t| t.is_none()).count();
    outcome(
        c.pass && censored == 0 && secs < 900.0,
        format!("t* = {:?}, slope {:.4} vs -1, {secs:.1}s", scan.t_star.iter().map(|t| t.unwrap_or(f64::NAN)).collect::<Vec<_>>(), c.value),
    )
}

fn c8_exhaustion() -> Outcome {
    let ev = evaluator("euclidean", 2);
    let h = 0.125;
    let window = Window { radius: 0.5, t1: 0.05, t2: 0.2 };
    let plan = ExhaustionPlan::geometric(2.0, 2, h, 2.0 * h, window);
    let datum = InitialDatum::DiracBump { mass: 1.0, center: [0.0, 0.0], width: 2.0 * h };
    let cfg = StepConfig { dt0: 1e-3, t_end: 0.2, dt_growth: 1.05, dt_max: 0.01, save_every: 1_000_000, ..StepConfig::default() };
    let ex = exhaust::run_exhaustion(&plan, &datum, 3.0, &ev, &cfg).unwrap();
    let e = &ex.report.errors;
    let a1 = exhaust::verify_a1(&ex.results, window, 3.0).unwrap();
    let pass = e.len() == 2 && ex.report.decreasing() && e[1] <= 0.5 * e[0] && a1.pass;
    outcome(pass, format!("e_n = {:.3e}, {:.3e}; A1 ratio {:.4}", e[0], e[1], a1.ratio))
}

fn random_field(grid: &Grid, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Field {
    let mut f = grid.zeros();
    for &p in grid.interior() {
        f[p] = rng.gen_range(lo..hi);
    }
    f
}

fn c9_monotone_structure() -> Outcome {
    let mut sbp: f64 = 0.0;
    let mut grad_err: f64 = 0.0;
    for spec in ["euclidean", "pnorm:1.5", "pnorm:4", "aniso:[[2,1],[1,2]]"] {
        let ev = evaluator(spec, 2);
        let grid = Grid::with_padding(1.0, 0.125, 2, &ev).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_field(&grid, &mut rng, -1.0, 1.0);
        let w = random_field(&grid, &mut rng, -1.0, 1.0);
        let lap = disc::finsler_laplacian(&grid, &ev, &u).unwrap();
        let lhs = grid.integrate(&lap.iter().zip(&w).map(|(a, b)| a * b).collect::<Vec<_>>());
        let gu = disc::face_gradients(&grid, &u).unwrap();
        let gw = disc::face_gradients(&grid, &w).unwrap();
        let rhs: f64 = -grid.face_weight()
            * (gu.x.iter().zip(&gw.x).map(|(a, b)| dot(ev.flux(*a), *b)).sum::<f64>()
                + gu.y.iter().zip(&gw.y).map(|(a, b)| dot(ev.flux(*a), *b)).sum::<f64>());
        sbp = sbp.max((lhs - rhs).abs() / rhs.abs().max(1.0));
        let step = 1e-6;
        for &p in grid.interior().iter().step_by(7) {
            let mut up = u.clone();
            let mut um = u.clone();
            up[p] += step;
            um[p] -= step;
            let fd = (disc::discrete_energy(&grid, &ev, &up).unwrap() - disc::discrete_energy(&grid, &ev, &um).unwrap())
                / (2.0 * step);
            let exact = -lap[p] * grid.node_volume();
            grad_err = grad_err.max((fd - exact).abs() / exact.abs().max(1.0));
        }
    }
    let mut order_gap: f64 = f64::NEG_INFINITY;
    let mut odd_err: f64 = 0.0;
    let tol = 1e-10;
    for seed in 0..5u64 {
        let (spec, dim, q) = if seed % 2 == 0 { ("euclidean", 1, 1.5) } else { ("aniso:[[2,1],[1,2]]", 2, 3.0) };
        let ev = evaluator(spec, dim);
        let grid = Grid::with_padding(1.0, if dim == 1 { 1.0 / 64.0 } else { 1.0 / 16.0 }, 2, &ev).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let v1 = random_field(&grid, &mut rng, -1.0, 1.0);
        let v2: Field = v1.iter().enumerate().map(|(p, x)| if grid.is_interior(p) { x + rng.gen_range(0.0..0.5) } else { 0.0 }).collect();
        let cfg = StepConfig { dt0: 2e-3, t_end: 2e-2, newton_tol: tol, ..StepConfig::default() };
        let r1 = stepper::run(&grid, &ev, q, &v1, &cfg).unwrap();
        let r2 = stepper::run(&grid, &ev, q, &v2, &cfg).unwrap();
        let neg: Field = v1.iter().map(|x| -x).collect();
        let rn = stepper::run(&grid, &ev, q, &neg, &cfg).unwrap();
        for ((a, b), c) in r1.snapshots.iter().zip(&r2.snapshots).zip(&rn.snapshots) {
            for p in 0..grid.n_nodes() {
                order_gap = order_gap.max(a.v[p] - b.v[p]);
                odd_err = odd_err.max((a.v[p] + c.v[p]).abs());
            }
        }
    }
    let pass = sbp <= 1e-10 && grad_err <= 1e-6 && order_gap <= 10.0 * tol && odd_err <= 10.0 * tol;
    outcome(
        pass,
        format!("SBP {sbp:.1e}, energy gradient {grad_err:.1e}, max order violation {order_gap:.1e}, odd symmetry {odd_err:.1e}"),
    )
}

fn c10_weak_residual(runs: &[ZkbRun]) -> Outcome {
    let ev = evaluator("euclidean", 1);
    let bump = TestBump { center: [0.9, 0.0], radius: 0.6, t_final: 2.5 };
    let r: Vec<f64> = runs
        .iter()
        .map(|run| stepper::residual_weakform(&run.result, &bump, &run.grid, &ev, ZKB_Q).unwrap().abs())
        .collect();
    let factor = r[0] / r[1];
    outcome(factor >= 1.5, format!("|residual| {:.3e} -> {:.3e}, factor {factor:.2}", r[0], r[1]))
}

fn c11_majorants(runs: &[ZkbRun]) -> Outcome {
    // closed forms against their ODEs by central differences
    let mp = MajorantParams::new(1.0, 1.0, ZKB_Q, 1).unwrap();
    let tb = mp.blowup_time().unwrap();
    let mut ode_err: f64 = 0.0;
    for h in [1e-3, 5e-4] {
        let mut e: f64 = 0.0;
        for k in 1..10 {
            let t = tb * k as f64 / 12.0;
            let f = |s| exact::majorant_phi(&mp, s).finite().unwrap();
            let fd = (f(t + h) - f(t - h)) / (2.0 * h);
            let rhs = mp.c1 * t.powf(-mp.time_exponent()) * f(t).powf(mp.power());
            e = e.max((fd - rhs).abs() / rhs);
            let (d, k3) = (mp.d, mp.kappa);
            let g = |s| exact::majorant_psi(1.0, 1.0, d, k3, s).finite().unwrap();
            let tg = exact::majorant_psi_blowup_time(1.0, 1.0, d, k3).unwrap() * k as f64 / 12.0;
            let fd = (g(tg + h) - g(tg - h)) / (2.0 * h);
            let rhs = tg.powf(1.0 / k3 - 1.0) * g(tg).powf(1.0 + d / k3);
            e = e.max((fd - rhs).abs() / rhs);
        }
        ode_err = ode_err.max(e / h);
    }
    let case1 = exact::ode_compare(|x| x, |_| 1.0, 1.0, 2.0, 1.0, 1e-3).map(|c| c.holds).unwrap_or(false);
    let case2 = exact::ode_compare(|x| x * x, |t: f64| t.powf(-0.5), 0.5, 1.0, 0.2, 1e-5).map(|c| c.holds).unwrap_or(false);
    let case3 = exact::ode_compare(|x| x, |_| 1.0, 1.0, 1.0, 1.0, 1e-3).is_err();

    let ev = evaluator("euclidean", 1);
    let reps: Vec<_> = runs
        .iter()
        .map(|run| estimates::majorant_consistency(&run.result, &run.grid, &ev, ZKB_Q, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap())
        .collect();
    let stable = |a: f64, b: f64| a.is_finite() && b.is_finite() && (a - b).abs() <= 0.2 * a.abs().max(b.abs());
    let consts = stable(reps[0].c2_min, reps[1].c2_min) && stable(reps[0].c3_min, reps[1].c3_min);
    let dominated = reps.iter().all(|r| r.phi_dominated && r.psi_dominated);
    let pass = ode_err < 10.0 && case1 && case2 && case3 && consts && dominated;
    outcome(
        pass,
        format!(
            "ODE defect/h {ode_err:.2}, ode_compare cases {case1}/{case2}/{case3}, C2* {:.4}->{:.4}, C3* {:.4}->{:.4}, dominated {dominated}",
            reps[0].c2_min, reps[1].c2_min, reps[0].c3_min, reps[1].c3_min
        ),
    )
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "norm identities", c1_norm_identities()));

    let start = Instant::now();
    let zkb = vec![zkb_run(1.0 / 64.0, 4e-3), zkb_run(1.0 / 128.0, 1e-3)];
    let zkb_secs = start.elapsed().as_secs_f64();
    results.push((2, "ZKB oracle convergence", c2_zkb_convergence(&zkb, zkb_secs)));
    results.push((3, "interface law", c3_interface_law(&zkb[1])));
    results.push((4, "mass conservation", c4_mass(&zkb)));

    let fde = fde_run();
    results.push((5, "FDE smoothing exponent", c5_fde_smoothing(&fde)));
    results.push((6, "vanishing-integral law", c6_vanishing_integral(&fde)));
    drop(fde);

    results.push((7, "blow-up scaling", c7_blowup_scaling()));
    results.push((8, "exhaustion Cauchy property", c8_exhaustion()));
    results.push((9, "discrete monotone structure", c9_monotone_structure()));
    results.push((10, "weak-form residual", c10_weak_residual(&zkb)));
    results.push((11, "majorants and comparison", c11_majorants(&zkb)));

    let mut failed = 0;
    for (n, name, o) in &results {
        println!("{} criterion {n:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
