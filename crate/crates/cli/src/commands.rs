//! Subcommands. Each writes its files into the configured output directory
//! and finishes with `manifest.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fdl_core::disc::{beta_field, Grid};
use fdl_core::estimates::{self, CheckKind, EstimateReport, TimeBound};
use fdl_core::exact::ZkbParams;
use fdl_core::exhaust::{self, ExhaustionPlan, InitialDatum, Window};
use fdl_core::io::{csv_row, fmt17};
use fdl_core::norms::FinslerEvaluator;
use fdl_core::stepper::{self, RunResult, RunStatus, TestBump};
use fdl_core::Error;

use crate::config::{Config, ConfigError, DatumSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Zkb,
    VerifyNorm,
    Exhaust,
    Estimates,
    BlowupScan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Zkb => "zkb",
            Command::VerifyNorm => "verify-norm",
            Command::Exhaust => "exhaust",
            Command::Estimates => "estimates",
            Command::BlowupScan => "blowup-scan",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("solver error: {0}")]
    Solver(#[from] Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Solver(_) | Failure::Io(_) => 3,
        }
    }
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    /// Files written, relative to the output directory, manifest last.
    pub files: Vec<String>,
    /// Names of the failed required checks.
    pub failed: Vec<String>,
    /// The solver stopped before `t_end` without a blow-up diagnosis.
    pub solver_failed: bool,
    /// Lines for standard output.
    pub stdout: String,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.solver_failed {
            3
        } else if !self.failed.is_empty() {
            1
        } else {
            0
        }
    }
}

struct Out {
    dir: PathBuf,
    files: Vec<String>,
    manifest: Vec<(String, String)>,
}

impl Out {
    fn new(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), manifest: Vec::new() })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<(), Failure> {
        fs::write(self.dir.join(name), text)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.manifest.push((key.to_string(), value.to_string()));
    }

    fn finish(mut self, cmd: Command, cfg: &Config, outcome: &mut Outcome) -> Result<(), Failure> {
        self.write("resolved.cfg", &cfg.render())?;
        let mut m = String::new();
        let _ = writeln!(m, "command={}", cmd.name());
        for (k, v) in &self.manifest {
            let _ = writeln!(m, "{k}={v}");
        }
        let _ = writeln!(m, "failed_checks={}", outcome.failed.join(","));
        self.files.push("manifest.txt".into());
        let _ = writeln!(m, "outputs={}", self.files.join(","));
        for (sec, kv) in &cfg.resolved {
            for (k, v) in kv {
                let _ = writeln!(m, "config.{sec}.{k}={v}");
            }
        }
        fs::write(self.dir.join("manifest.txt"), m)?;
        outcome.files = self.files;
        Ok(())
    }
}

fn reject(key: &str, reason: impl Into<String>) -> Failure {
    Failure::Config(ConfigError::Validation { key: key.into(), reason: reason.into() })
}

/// Runs `cmd` with output paths under `cfg.output_dir`.
pub fn execute(cmd: Command, cfg: &Config) -> Result<Outcome, Failure> {
    let mut out = Out::new(Path::new(&cfg.output_dir))?;
    let mut outcome = Outcome::default();
    out.note("q", cfg.q);
    out.note("N", cfg.dim);
    out.note("norm", cfg.norm);
    out.note("R", cfg.radius);
    out.note("h", cfg.h);
    out.note("dt0", cfg.step.dt0);
    match cmd {
        Command::Solve => solve(cfg, &mut out, &mut outcome, false)?,
        Command::Estimates => solve(cfg, &mut out, &mut outcome, true)?,
        Command::Zkb => zkb(cfg, &mut out, &mut outcome)?,
        Command::VerifyNorm => verify_norm(cfg, &mut out, &mut outcome)?,
        Command::Exhaust => exhaust_cmd(cfg, &mut out, &mut outcome)?,
        Command::BlowupScan => blowup_scan(cfg, &mut out, &mut outcome)?,
    }
    out.finish(cmd, cfg, &mut outcome)?;
    Ok(outcome)
}

fn evaluator(cfg: &Config) -> Result<FinslerEvaluator, Failure> {
    FinslerEvaluator::new(cfg.norm).map_err(|e| reject("norm", e.to_string()))
}

fn grid_for(cfg: &Config, ev: &FinslerEvaluator, radius: f64) -> Result<Grid, Failure> {
    let g = match cfg.half_width {
        Some(l) => Grid::build(radius, cfg.h, l, ev),
        None => Grid::with_padding(radius, cfg.h, cfg.pad, ev),
    };
    g.map_err(|e| reject("grid", e.to_string()))
}

/// The library datum, with a `DiracBump` width of 0 replaced by `2h`.
fn library_datum(cfg: &Config) -> Option<InitialDatum> {
    match &cfg.datum {
        DatumSpec::Datum(InitialDatum::DiracBump { mass, center, width }) if *width == 0.0 => {
            Some(InitialDatum::DiracBump { mass: *mass, center: *center, width: 2.0 * cfg.h })
        }
        DatumSpec::Datum(d) => Some(d.clone()),
        DatumSpec::Zkb { .. } => None,
    }
}

fn initial_v(cfg: &Config, ev: &FinslerEvaluator, grid: &Grid) -> Result<Vec<f64>, Failure> {
    match (&cfg.datum, library_datum(cfg)) {
        (DatumSpec::Zkb { c, t0 }, _) => {
            let z = ZkbParams::new(cfg.q, cfg.dim, *c)?;
            let u = grid.sample(|x| z.eval(ev, x, *t0).unwrap_or(0.0));
            Ok(beta_field(cfg.q, &u))
        }
        (_, Some(d)) => Ok(exhaust::mollify(&d, ev, cfg.q, grid, cfg.delta)?),
        _ => unreachable!("datum is either ZKB or a library datum"),
    }
}

fn status_text(s: RunStatus) -> (String, f64) {
    match s {
        RunStatus::Completed => ("Completed".into(), f64::NAN),
        RunStatus::BlowUpSuspected { t_star } => ("BlowUpSuspected".into(), t_star),
        RunStatus::SolverFailed { t } => (format!("SolverFailed(t={})", fmt17(t)), f64::NAN),
    }
}

fn monitors_csv(res: &RunResult) -> String {
    let mut s = String::from("t,mass,sup,grad_l1,energy\n");
    for m in &res.monitors {
        let _ = writeln!(s, "{}", csv_row(&[m.t, m.mass, m.sup, m.grad_l1, m.energy]));
    }
    s
}

fn field_csv(grid: &Grid, u: &[f64]) -> Result<String, Failure> {
    let mut buf = Vec::new();
    grid.write_csv(u, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is ASCII"))
}

fn needs_window(r: &str) -> bool {
    matches!(r, "fde" | "pme" | "a1" | "a2")
}

fn default_reports(q: f64) -> Vec<String> {
    let names: &[&str] = if q < 2.0 { &["max_principle", "pme", "support"] } else if q > 2.0 { &["max_principle", "fde"] } else { &["max_principle"] };
    names.iter().map(|s| s.to_string()).collect()
}

fn solve(cfg: &Config, out: &mut Out, outcome: &mut Outcome, estimates_mode: bool) -> Result<(), Failure> {
    let ev = evaluator(cfg)?;
    let grid = grid_for(cfg, &ev, cfg.radius)?;
    let v0 = initial_v(cfg, &ev, &grid)?;
    let reports = if estimates_mode && cfg.reports.is_empty() { default_reports(cfg.q) } else { cfg.reports.clone() };
    let mut step = cfg.step.clone();
    if step.window_radius.is_none() && reports.iter().any(|r| needs_window(r)) {
        step.window_radius = Some(cfg.check_radius);
    }
    let res = stepper::run(&grid, &ev, cfg.q, &v0, &step)?;

    let (status, t_star) = status_text(res.status);
    out.note("status", &status);
    out.note("t_star", fmt17(t_star));
    out.note("steps", res.steps);
    out.note("newton_iterations", res.newton_iterations);
    out.note("rejected_steps", res.rejected_steps);
    out.note("t_final", fmt17(res.final_snapshot().t));
    out.write("monitors.csv", &monitors_csv(&res))?;
    out.note("monitors", "monitors.csv");
    out.write("initial_u.csv", &field_csv(&grid, &res.snapshots[0].u)?)?;
    out.write("final_u.csv", &field_csv(&grid, &res.final_snapshot().u)?)?;
    let _ = writeln!(outcome.stdout, "status={status} t_star={} steps={}", fmt17(t_star), res.steps);
    outcome.solver_failed = matches!(res.status, RunStatus::SolverFailed { .. });

    if estimates_mode && cfg.q > 1.0 && cfg.q < 2.0 {
        let datum = match library_datum(cfg) {
            Some(d) => d,
            None => InitialDatum::Custom(v0.clone()),
        };
        let ex = estimates::existence_time(&datum, &ev, cfg.r, cfg.q, cfg.c, &grid)?;
        let bound = |b: TimeBound| match b {
            TimeBound::Finite(t) => fmt17(t),
            TimeBound::Infinite => "inf".into(),
        };
        out.note("growth_norm", fmt17(ex.norm.sup));
        out.note("existence_time_local", bound(ex.local));
        out.note("a_mu", fmt17(ex.a_mu));
        out.note("existence_time_global", bound(ex.global));
    }

    if reports.is_empty() {
        return Ok(());
    }
    let mut report = EstimateReport::default();
    let mut window_done = false;
    for name in &reports {
        match name.as_str() {
            "max_principle" => {
                let bound = cfg.bound.unwrap_or_else(|| v0.iter().fold(0.0f64, |m, x| m.max(x.abs())));
                let worst = res.monitors.iter().map(|m| fdl_core::disc::beta(cfg.q, m.sup)).fold(0.0f64, f64::max);
                report.check(
                    "max_principle",
                    stepper::max_principle_check(&res, bound),
                    worst,
                    bound,
                    1e-8 * bound,
                    CheckKind::Required,
                );
            }
            "fde" => {
                let times = eval_times(cfg, &res)?;
                merge(&mut report, estimates::fde_report(&res, &grid, &ev, cfg.q, cfg.p, cfg.check_radius, &times)?);
            }
            "pme" => {
                let times = eval_times(cfg, &res)?;
                merge(&mut report, estimates::pme_report(&res, &grid, &ev, cfg.q, cfg.r, cfg.check_radius, &times)?);
            }
            "support" => {
                let s = estimates::support_radius(&res, &grid, &ev, None);
                report.push_series("support_radius", &s.t, &s.radius);
                let n = cfg.dim as f64;
                let d = fdl_core::exact::growth_exponent_d(cfg.q);
                let beta = 1.0 / (2.0 + n * d);
                match s.fit {
                    Some(f) => report.near("support_slope", f.slope, beta, 0.05 * beta),
                    None => report.check("support_slope", false, f64::NAN, beta, 0.05 * beta, CheckKind::Required),
                }
            }
            "majorant" => {
                let m = estimates::majorant_consistency(&res, &grid, &ev, cfg.q, cfg.r, cfg.c1, cfg.c2, cfg.c3, cfg.c5)?;
                merge(&mut report, m.report);
            }
            "weak_residual" => {
                let bump = TestBump { center: [0.0, 0.0], radius: cfg.check_radius, t_final: res.final_snapshot().t };
                let r = stepper::residual_weakform(&res, &bump, &grid, &ev, cfg.q)?;
                report.check("weak_residual", true, r, 0.0, f64::NAN, CheckKind::Informational);
            }
            "a1" | "a2" if !window_done => {
                window_checks(cfg, std::slice::from_ref(&res), &mut report)?;
                window_done = true;
            }
            "a1" | "a2" => {}
            other => return Err(reject("reports", format!("unsupported report {other:?}"))),
        }
    }
    emit_report(out, outcome, &report, "estimates")
}

fn eval_times(cfg: &Config, res: &RunResult) -> Result<Vec<f64>, Failure> {
    if cfg.times.len() >= 2 {
        return Ok(cfg.times.clone());
    }
    let t0 = res.snapshots[0].t;
    let t1 = res.final_snapshot().t;
    if !(t1 > t0) {
        return Err(reject("times", "run ended before any time elapsed"));
    }
    Ok((1..=8).map(|k| t0 + (t1 - t0) * 2f64.powi(k - 8)).collect())
}

fn merge(into: &mut EstimateReport, from: EstimateReport) {
    into.checks.extend(from.checks);
    into.series.extend(from.series);
    into.fits.extend(from.fits);
}

fn emit_report(out: &mut Out, outcome: &mut Outcome, report: &EstimateReport, stem: &str) -> Result<(), Failure> {
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    out.write(&format!("{stem}.csv"), &String::from_utf8(csv).expect("csv output is ASCII"))?;
    let summary = report.summary();
    out.write(&format!("{stem}_checks.txt"), &summary)?;
    outcome.stdout.push_str(&summary);
    outcome
        .failed
        .extend(report.checks.iter().filter(|c| !c.pass && c.kind == CheckKind::Required).map(|c| c.name.clone()));
    Ok(())
}

fn observation_window(cfg: &Config) -> Window {
    Window {
        radius: cfg.step.window_radius.unwrap_or(cfg.check_radius),
        t1: cfg.t1.unwrap_or(cfg.step.t_start),
        t2: cfg.t2.unwrap_or(cfg.step.t_end),
    }
}

/// Adds the A1 and A2 checks requested in `cfg.reports` (A1 always when
/// `reports` is empty).
fn window_checks(cfg: &Config, results: &[RunResult], report: &mut EstimateReport) -> Result<(Option<Vec<f64>>, bool), Failure> {
    let w = observation_window(cfg);
    let mut a1_values = None;
    if cfg.reports.is_empty() || cfg.wants("a1") {
        let a1 = exhaust::verify_a1(results, w, cfg.delta_exponent)?;
        report.check("a1_ratio", a1.pass, a1.ratio, 1.0, 1.0, CheckKind::Required);
        a1_values = Some(a1.values);
    }
    let mut a2_pass = true;
    if cfg.wants("a2") {
        if cfg.a2_times.is_empty() {
            return Err(reject("a2_times", "required for the a2 report"));
        }
        let a2 = exhaust::verify_a2(results, w.radius, &cfg.a2_times)?;
        report.push_series("a2_g", &a2.t_grid, &a2.g);
        let slope = a2.fit.map(|f| f.slope).unwrap_or(f64::NAN);
        report.check("a2_growth", a2.pass, slope, 0.0, f64::NAN, CheckKind::Required);
        a2_pass = a2.pass;
    }
    Ok((a1_values, a2_pass))
}

fn zkb(cfg: &Config, out: &mut Out, outcome: &mut Outcome) -> Result<(), Failure> {
    let (c, t0) = match cfg.datum {
        DatumSpec::Zkb { c, t0 } => (c, t0),
        _ => (cfg.c, cfg.step.t_start.max(f64::MIN_POSITIVE)),
    };
    let z = ZkbParams::new(cfg.q, cfg.dim, c).map_err(|e| reject("q", e.to_string()))?;
    let times = if cfg.times.is_empty() { vec![t0, cfg.step.t_end] } else { cfg.times.clone() };
    if times.iter().any(|&t| !(t > 0.0)) {
        return Err(reject("times", "ZKB times must be positive"));
    }
    let mut params = String::new();
    for (k, v) in [("q", z.q), ("N", z.dim as f64), ("C", z.c), ("alpha", z.alpha), ("beta", z.beta), ("k", z.k), ("d", z.d)] {
        let _ = writeln!(params, "{k}={}", fmt17(v));
    }
    for &t in &times {
        let _ = writeln!(params, "support_radius(t={})={}", fmt17(t), fmt17(z.support_radius(t)?));
    }
    out.write("zkb_params.txt", &params)?;
    let n_r = (cfg.radius / cfg.h).round() as usize;
    let mut csv = String::from("r,t,u\n");
    for &t in &times {
        for i in 0..=n_r {
            let r = i as f64 * cfg.h;
            let _ = writeln!(csv, "{}", csv_row(&[r, t, z.profile(r, t)?]));
        }
    }
    out.write("zkb_profile.csv", &csv)?;
    outcome.stdout.push_str(&params);
    outcome.stdout.push_str(&csv);
    Ok(())
}

fn verify_norm(cfg: &Config, out: &mut Out, outcome: &mut Outcome) -> Result<(), Failure> {
    let ev = evaluator(cfg)?;
    let rep = ev.verify_identities(cfg.samples, cfg.seed);
    let mut csv = String::from("quantity,value\n");
    let rows = [
        ("samples", rep.samples as f64),
        ("max_euler_residual", rep.max_euler_residual),
        ("max_dual_grad_residual", rep.max_dual_grad_residual),
        ("max_duality_excess", rep.max_duality_excess),
        ("max_flux_dual_residual", rep.max_flux_dual_residual),
        ("min_monotonicity", rep.min_monotonicity),
    ];
    for (k, v) in rows {
        let _ = writeln!(csv, "{k},{}", fmt17(v));
    }
    out.write("norm_identities.csv", &csv)?;
    let tol = cfg.identity_tol;
    let mut report = EstimateReport::default();
    for (name, v) in [
        ("euler_identity", rep.max_euler_residual),
        ("dual_gradient_identity", rep.max_dual_grad_residual),
        ("duality_inequality", rep.max_duality_excess),
        ("flux_dual_identity", rep.max_flux_dual_residual),
    ] {
        report.check(name, v <= tol, v, 0.0, tol, CheckKind::Required);
    }
    report.check(
        "flux_monotonicity",
        rep.min_monotonicity >= -cfg.monotonicity_tol,
        rep.min_monotonicity,
        0.0,
        cfg.monotonicity_tol,
        CheckKind::Required,
    );
    let summary = report.summary();
    out.write("norm_checks.txt", &summary)?;
    outcome.stdout.push_str(&summary);
    outcome
        .failed
        .extend(report.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()));
    Ok(())
}

fn exhaust_cmd(cfg: &Config, out: &mut Out, outcome: &mut Outcome) -> Result<(), Failure> {
    let ev = evaluator(cfg)?;
    let datum = library_datum(cfg).ok_or_else(|| reject("datum", "exhaust needs dirac, density or critical data"))?;
    if cfg.radii.len() < 2 {
        return Err(reject("radii", "exhaust needs at least two radii"));
    }
    let plan = ExhaustionPlan {
        radii: cfg.radii.clone(),
        h: cfg.h,
        delta: cfg.delta,
        window: observation_window(cfg),
        pad_cells: cfg.pad,
        tol_window: cfg.tol_window,
    };
    plan.validate().map_err(|e| reject("radii", e.to_string()))?;
    let ex = exhaust::run_exhaustion(&plan, &datum, cfg.q, &ev, &cfg.step)?;

    for (n, res) in ex.results.iter().enumerate() {
        out.write(&format!("level_{n}_monitors.csv"), &monitors_csv(res))?;
        let (status, t_star) = status_text(res.status);
        out.note(&format!("level_{n}_status"), status);
        out.note(&format!("level_{n}_t_star"), fmt17(t_star));
    }
    let mut report = EstimateReport::default();
    let (a1, a2_pass) = window_checks(cfg, &ex.results, &mut report)?;
    let mut csv = String::from("n,R_n,e_n,A1_value\n");
    for (n, &r) in ex.report.radii.iter().enumerate() {
        let e = if n == 0 { f64::NAN } else { ex.report.errors.get(n - 1).copied().unwrap_or(f64::NAN) };
        let a = a1.as_ref().map(|v| v[n]).unwrap_or(f64::NAN);
        let _ = writeln!(csv, "{n},{}", csv_row(&[r, e, a]));
    }
    let status = format!("{:?}", ex.report.status);
    let decreasing = ex.report.decreasing();
    let converged = matches!(ex.report.status, exhaust::ConvergenceStatus::Converged);
    let pass = converged && decreasing && report.passed() && a2_pass;
    let _ = writeln!(
        csv,
        "# {} status={status} decreasing={decreasing}",
        if pass { "PASS" } else { "FAIL" }
    );
    out.write("exhaust.csv", &csv)?;
    outcome.stdout.push_str(&csv);
    report.check("exhaust_converged", converged, ex.report.errors.last().copied().unwrap_or(f64::NAN), 0.0, cfg.tol_window, CheckKind::Required);
    report.check("exhaust_decreasing", decreasing, ex.report.errors.len() as f64, 0.0, f64::NAN, CheckKind::Required);
    out.note("convergence_status", status);
    emit_report(out, outcome, &report, "exhaust_report")
}

fn blowup_scan(cfg: &Config, out: &mut Out, outcome: &mut Outcome) -> Result<(), Failure> {
    let ev = evaluator(cfg)?;
    let grid = grid_for(cfg, &ev, cfg.radius)?;
    let scan = match estimates::blowup_scan(&cfg.amplitudes, cfg.q, &ev, &grid, cfg.delta, &cfg.step) {
        Ok(s) => s,
        Err(Error::AllCensored) => {
            outcome.failed.push("blowup_slope".into());
            out.note("status", "AllCensored");
            let _ = writeln!(outcome.stdout, "no amplitude blew up before t_end");
            return Ok(());
        }
        Err(Error::InvalidArgument(m)) => return Err(reject("amplitudes", m)),
        Err(e) => return Err(e.into()),
    };
    let mut csv = String::from("amplitude,t_star,status\n");
    for ((a, t), s) in scan.amplitudes.iter().zip(&scan.t_star).zip(&scan.statuses) {
        let _ = writeln!(csv, "{},{}", csv_row(&[*a, t.unwrap_or(f64::NAN)]), status_text(*s).0);
    }
    out.write("blowup.csv", &csv)?;
    outcome.stdout.push_str(&csv);
    emit_report(out, outcome, &scan.report, "blowup_report")
}
