//! Approximation of growing or measure-valued data by compactly supported
//! smooth data on expanding balls, and the window diagnostics of the
//! resulting family of runs.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::disc::{Field, Grid};
use crate::error::{Error, Result};
use crate::estimates::{loglog_fit, Fit};
use crate::exact::growth_exponent_d;
use crate::exec;
use crate::norms::{FinslerEvaluator, Vec2};
use crate::stepper::{self, RunResult, RunStatus, StepConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    /// `cos²(π H_0(x−c)/(2w))` on `H_0(x−c) < w`, scaled to mass `mass`.
    DiracBump { mass: f64, center: Vec2, width: f64 },
    /// `A (1 + H_0(x))^γ`.
    Density { gamma: f64, amplitude: f64 },
    /// Density with the critical exponent `γ = 2/d`.
    CriticalGrowth { amplitude: f64 },
    /// Values on the nodes of the target grid.
    Custom(Field),
}

impl InitialDatum {
    /// Pointwise density at `x`. `Custom` has none and yields `None`.
    pub fn density(&self, ev: &FinslerEvaluator, q: f64, x: Vec2) -> Option<f64> {
        match *self {
            InitialDatum::DiracBump { mass, center, width } => {
                let r = ev.dual_eval([x[0] - center[0], x[1] - center[1]]);
                if r >= width {
                    return Some(0.0);
                }
                let norm = bump_integral(ev, width).ok()?;
                Some(mass * (FRAC_PI_2 * r / width).cos().powi(2) / norm)
            }
            InitialDatum::Density { gamma, amplitude } => Some(amplitude * (1.0 + ev.dual_eval(x)).powf(gamma)),
            InitialDatum::CriticalGrowth { amplitude } => {
                let gamma = 2.0 / growth_exponent_d(q);
                Some(amplitude * (1.0 + ev.dual_eval(x)).powf(gamma))
            }
            InitialDatum::Custom(_) => None,
        }
    }

    /// The same datum scaled by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        match self {
            InitialDatum::DiracBump { mass, center, width } => {
                InitialDatum::DiracBump { mass: s * mass, center: *center, width: *width }
            }
            InitialDatum::Density { gamma, amplitude } => InitialDatum::Density { gamma: *gamma, amplitude: s * amplitude },
            InitialDatum::CriticalGrowth { amplitude } => InitialDatum::CriticalGrowth { amplitude: s * amplitude },
            InitialDatum::Custom(f) => InitialDatum::Custom(f.iter().map(|x| s * x).collect()),
        }
    }
}

/// `∫ cos²(π H_0(x)/(2w)) dx`, from `|B_r| = |B_1| r^N`.
fn bump_integral(ev: &FinslerEvaluator, w: f64) -> Result<f64> {
    let unit = ev.ball_volume(1.0)?;
    Ok(match ev.dim() {
        1 => unit * w / 2.0,
        _ => unit * 2.0 * w * w * (0.25 - 1.0 / (PI * PI)),
    })
}

/// Cutoff equal to 1 on `B_{R/2}`, `cos²` decay to 0 at `H_0 = R`.
pub fn cutoff(r: f64, radius: f64) -> f64 {
    if r <= 0.5 * radius {
        1.0
    } else if r >= radius {
        0.0
    } else {
        (PI * (r - 0.5 * radius) / radius).cos().powi(2)
    }
}

fn gaussian_weights(h: f64, delta: f64) -> Vec<f64> {
    if delta <= 0.0 {
        return vec![1.0];
    }
    let m = (4.0 * delta / h).floor() as usize;
    (0..=m).map(|k| (-0.5 * (k as f64 * h / delta).powi(2)).exp()).collect()
}

/// One-dimensional smoothing along `axis`, normalized by the kernel mass
/// that falls inside the box.
fn smooth_axis(grid: &Grid, f: &[f64], w: &[f64], axis: usize) -> Field {
    let n = grid.n_side() as isize;
    let m = w.len() as isize - 1;
    let mut out = grid.zeros();
    exec::fill(&mut out, |p| {
        let (i, j) = grid.ij(p);
        let c = if axis == 0 { i } else { j } as isize;
        let (mut s, mut z) = (0.0, 0.0);
        for k in -m..=m {
            let a = c + k;
            if a < 0 || a >= n {
                continue;
            }
            let q = if axis == 0 { grid.index(a as usize, j) } else { grid.index(i, a as usize) };
            let wk = w[k.unsigned_abs()];
            s += wk * f[q];
            z += wk;
        }
        s / z
    });
    out
}

/// Smoothed datum before the cutoff, sampled on the whole box.
pub fn smoothed_datum(datum: &InitialDatum, ev: &FinslerEvaluator, q: f64, grid: &Grid, delta: f64) -> Result<Field> {
    let raw = match datum {
        InitialDatum::Custom(f) => {
            grid.check(f)?;
            f.clone()
        }
        d => {
            let mut out = grid.zeros();
            exec::fill(&mut out, |p| d.density(ev, q, grid.coords(p)).unwrap_or(0.0));
            out
        }
    };
    let w = gaussian_weights(grid.h(), delta);
    let mut f = raw;
    if w.len() > 1 {
        f = smooth_axis(grid, &f, &w, 0);
        if grid.dim() == 2 {
            f = smooth_axis(grid, &f, &w, 1);
        }
    }
    if let InitialDatum::DiracBump { mass, .. } = datum {
        let total = grid.integrate(&f);
        if total == 0.0 {
            return Err(Error::InvalidArgument("bump is not resolved by the grid".into()));
        }
        let s = mass / total;
        f.iter_mut().for_each(|x| *x *= s);
    }
    Ok(f)
}

/// `ζ_n · (smoothed datum)`, zero outside the ball of `grid`.
pub fn mollify(datum: &InitialDatum, ev: &FinslerEvaluator, q: f64, grid: &Grid, delta: f64) -> Result<Field> {
    let f = smoothed_datum(datum, ev, q, grid, delta)?;
    let radius = grid.radius();
    let mut out = grid.zeros();
    exec::fill(&mut out, |p| {
        if !grid.is_interior(p) {
            return 0.0;
        }
        let z = cutoff(ev.dual_eval(grid.coords(p)), radius);
        if z == 1.0 {
            f[p]
        } else {
            z * f[p]
        }
    });
    Ok(out)
}

/// Observation window `B_{R_obs} × (t₁, t₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub radius: f64,
    pub t1: f64,
    pub t2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustionPlan {
    pub radii: Vec<f64>,
    /// Spacing shared by all levels.
    pub h: f64,
    /// Mollification width shared by all levels.
    pub delta: f64,
    pub window: Window,
    pub pad_cells: usize,
    /// `Converged` when the last window error is at most this.
    pub tol_window: f64,
}

impl ExhaustionPlan {
    /// `R_n = R₀ 2ⁿ`, `n = 0..=n_max`.
    pub fn geometric(r0: f64, n_max: usize, h: f64, delta: f64, window: Window) -> Self {
        Self {
            radii: (0..=n_max).map(|n| r0 * 2f64.powi(n as i32)).collect(),
            h,
            delta,
            window,
            pad_cells: 2,
            tol_window: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("exhaustion plan: {m}")));
        if self.radii.is_empty() {
            return bad("no levels");
        }
        if self.radii.windows(2).any(|w| !(w[1] > w[0])) || !(self.radii[0] > 0.0) {
            return bad("radii must be positive and increasing");
        }
        if !(self.h > 0.0) || !(self.delta >= 0.0) {
            return bad("h must be positive and delta nonnegative");
        }
        let w = self.window;
        if !(w.radius > 0.0 && w.radius < 0.5 * self.radii[0]) {
            return bad("window radius must lie in (0, R_0/2)");
        }
        if !(w.t1 >= 0.0 && w.t2 > w.t1) {
            return bad("need 0 <= t1 < t2");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvergenceStatus {
    Converged,
    NotConverged,
    BlowUpAtLevel(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub radii: Vec<f64>,
    /// `errors[k]` compares level `k+1` with level `k`.
    pub errors: Vec<f64>,
    pub status: ConvergenceStatus,
}

impl ConvergenceReport {
    /// Errors strictly decreasing in `n`.
    pub fn decreasing(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] < w[0])
    }
}

#[derive(Debug, Clone)]
pub struct Exhaustion {
    pub grids: Vec<Grid>,
    pub results: Vec<RunResult>,
    pub report: ConvergenceReport,
}

/// Runs every level of `plan` (concurrently) and compares consecutive levels
/// on the observation window.
pub fn run_exhaustion(
    plan: &ExhaustionPlan,
    datum: &InitialDatum,
    q: f64,
    ev: &FinslerEvaluator,
    cfg: &StepConfig,
) -> Result<Exhaustion> {
    plan.validate()?;
    if plan.window.t2 > cfg.t_end {
        return Err(Error::InvalidArgument("window end t2 exceeds t_end".into()));
    }
    let level_cfg = StepConfig { window_radius: Some(plan.window.radius), record_window: true, ..cfg.clone() };
    let levels: Vec<Result<(Grid, RunResult)>> = exec::map(&plan.radii, |&r| {
        let grid = Grid::with_padding(r, plan.h, plan.pad_cells, ev)?;
        let mu = mollify(datum, ev, q, &grid, plan.delta)?;
        let res = stepper::run(&grid, ev, q, &mu, &level_cfg)?;
        Ok((grid, res))
    });
    let mut grids = Vec::new();
    let mut results = Vec::new();
    for l in levels {
        let (g, r) = l?;
        grids.push(g);
        results.push(r);
    }
    let blown = results.iter().position(|r| r.status != RunStatus::Completed);
    let mut errors = Vec::new();
    for k in 1..results.len() {
        if blown.is_some_and(|b| b <= k) {
            break;
        }
        errors.push(window_error(&grids[k - 1], &results[k - 1], &grids[k], &results[k], plan.window)?);
    }
    let status = match blown {
        Some(n) => ConvergenceStatus::BlowUpAtLevel(n),
        None if errors.last().is_none_or(|&e| e <= plan.tol_window) => ConvergenceStatus::Converged,
        None => ConvergenceStatus::NotConverged,
    };
    Ok(Exhaustion { grids, results, report: ConvergenceReport { radii: plan.radii.clone(), errors, status } })
}

/// Window field of `res` at time `t`, linear in time between records.
fn window_at(res: &RunResult, t: f64) -> Field {
    let s = &res.window_series;
    let k = s.partition_point(|w| w.t < t);
    if k == 0 {
        return s[0].u.clone();
    }
    if k == s.len() {
        return s[k - 1].u.clone();
    }
    let (a, b) = (&s[k - 1], &s[k]);
    let th = (t - a.t) / (b.t - a.t);
    a.u.iter().zip(&b.u).map(|(x, y)| x + th * (y - x)).collect()
}

/// `‖u_a − u_b‖_{L¹(B_{R_obs} × (t₁, t₂))}` with trapezoid quadrature on the
/// union of both record times.
pub fn window_error(ga: &Grid, ra: &RunResult, gb: &Grid, rb: &RunResult, window: Window) -> Result<f64> {
    if ra.window_series.is_empty() || rb.window_series.is_empty() {
        return Err(Error::InvalidArgument("runs carry no window fields".into()));
    }
    if ra.window_nodes.len() != rb.window_nodes.len() || (ga.h() - gb.h()).abs() > 1e-12 * ga.h() {
        return Err(Error::InvalidArgument("window grids differ".into()));
    }
    for (&p, &q) in ra.window_nodes.iter().zip(&rb.window_nodes) {
        let (x, y) = (ga.coords(p), gb.coords(q));
        if (x[0] - y[0]).abs() + (x[1] - y[1]).abs() > 1e-9 * ga.h() {
            return Err(Error::InvalidArgument("window nodes do not coincide".into()));
        }
    }
    let mut times: Vec<f64> = ra
        .window_series
        .iter()
        .chain(&rb.window_series)
        .map(|w| w.t)
        .filter(|&t| t > window.t1 && t < window.t2)
        .collect();
    times.push(window.t1);
    times.push(window.t2);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1.0));
    let vol = ga.node_volume();
    let dist: Vec<f64> = times
        .iter()
        .map(|&t| {
            let (a, b) = (window_at(ra, t), window_at(rb, t));
            exec::sum(a.len(), |i| (a[i] - b[i]).abs()) * vol
        })
        .collect();
    Ok(trapezoid(&times, &dist))
}

pub(crate) fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    t.windows(2).zip(f.windows(2)).map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1])).sum()
}

/// Cumulative trapezoid integral, starting at 0.
pub(crate) fn cumulative(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..t.len() {
        acc += 0.5 * (t[k] - t[k - 1]) * (f[k] + f[k - 1]);
        out.push(acc);
    }
    out
}

fn interp(t: &[f64], f: &[f64], x: f64) -> f64 {
    let k = t.partition_point(|&s| s < x);
    if k == 0 {
        return f[0];
    }
    if k == t.len() {
        return f[k - 1];
    }
    let th = (x - t[k - 1]) / (t[k] - t[k - 1]);
    f[k - 1] + th * (f[k] - f[k - 1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct A1Report {
    pub delta_exponent: f64,
    pub window: Window,
    pub values: Vec<f64>,
    pub max: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// Per level, `∫(∫_{B_R}|u|)^δ dt + ∫∫(|v|² + H(∇u)²)` over the window,
/// and the spread `max/min` across levels.
pub fn verify_a1(results: &[RunResult], window: Window, delta_exponent: f64) -> Result<A1Report> {
    if !(delta_exponent > 2.0) {
        return Err(Error::InvalidArgument("delta exponent must exceed 2".into()));
    }
    let mut values = Vec::new();
    for res in results {
        check_window(res, window.radius)?;
        let (t, f) = series(res, window.t1, window.t2, |w| {
            w.u_l1.powf(delta_exponent) + w.v_sq + w.grad_sq
        });
        values.push(trapezoid(&t, &f));
    }
    let max = values.iter().cloned().fold(0.0, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if max == 0.0 { 1.0 } else { max / min };
    Ok(A1Report { delta_exponent, window, values, max, ratio, pass: ratio <= 2.0 })
}

fn check_window(res: &RunResult, radius: f64) -> Result<()> {
    match res.window_radius {
        Some(r) if (r - radius).abs() <= 1e-12 * radius => Ok(()),
        _ => Err(Error::InvalidArgument(format!("run was not monitored on the window of radius {radius}"))),
    }
}

/// Monitor times in `[t1, t2]` with the window quantity `f`; the end points
/// are interpolated.
fn series<F: Fn(&stepper::WindowMonitor) -> f64>(res: &RunResult, t1: f64, t2: f64, f: F) -> (Vec<f64>, Vec<f64>) {
    let t_all: Vec<f64> = res.monitors.iter().map(|m| m.t).collect();
    let f_all: Vec<f64> = res.monitors.iter().map(|m| m.window.map(|w| f(&w)).unwrap_or(0.0)).collect();
    let mut t = vec![t1];
    let mut v = vec![interp(&t_all, &f_all, t1)];
    for (&s, &y) in t_all.iter().zip(&f_all) {
        if s > t1 && s < t2 {
            t.push(s);
            v.push(y);
        }
    }
    t.push(t2);
    v.push(interp(&t_all, &f_all, t2));
    (t, v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct A2Report {
    pub t_grid: Vec<f64>,
    pub g: Vec<f64>,
    pub fit: Option<Fit>,
    /// `g` strictly increasing along `t_grid`.
    pub monotone: bool,
    pub pass: bool,
}

/// `g(t) = sup_n ∫₀ᵗ∫_{B_R}(|v_n| + H(∇u_n))` on `t_grid` and its log-log
/// slope.
pub fn verify_a2(results: &[RunResult], radius: f64, t_grid: &[f64]) -> Result<A2Report> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) || !(t_grid[0] > 0.0) {
        return Err(Error::InvalidArgument("t_grid must be positive and increasing".into()));
    }
    let mut g = vec![0.0f64; t_grid.len()];
    for res in results {
        check_window(res, radius)?;
        let t0 = res.monitors[0].t;
        let t: Vec<f64> = res.monitors.iter().map(|m| m.t - t0).collect();
        let f: Vec<f64> = res.monitors.iter().map(|m| m.window.map(|w| w.v_l1 + w.grad_l1).unwrap_or(0.0)).collect();
        let c = cumulative(&t, &f);
        for (gk, &x) in g.iter_mut().zip(t_grid) {
            *gk = gk.max(interp(&t, &c, x));
        }
    }
    if g.iter().all(|&x| x == 0.0) {
        return Ok(A2Report { t_grid: t_grid.to_vec(), g, fit: None, monotone: true, pass: true });
    }
    let monotone = g.windows(2).all(|w| w[1] > w[0]) && g[0] > 0.0;
    let fit = if monotone { Some(loglog_fit(t_grid, &g)?) } else { None };
    let pass = monotone && fit.as_ref().is_some_and(|f| f.slope >= 0.4);
    Ok(A2Report { t_grid: t_grid.to_vec(), g, fit, monotone, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::NormSpec;
    use approx::assert_relative_eq;

    fn euclid(dim: usize) -> FinslerEvaluator {
        FinslerEvaluator::new(NormSpec::euclidean(dim)).unwrap()
    }

    #[test]
    fn constant_density_plateau() {
        let ev = euclid(2);
        let g = Grid::with_padding(4.0, 0.125, 2, &ev).unwrap();
        let mu = mollify(&InitialDatum::Density { gamma: 0.0, amplitude: 2.5 }, &ev, 1.5, &g, 0.2).unwrap();
        for p in g.nodes_within(&ev, 2.0) {
            assert_eq!(mu[p], 2.5);
        }
    }

    #[test]
    fn dirac_bump_mass() {
        for dim in [1, 2] {
            let ev = euclid(dim);
            let g = Grid::with_padding(2.0, 1.0 / 32.0, 2, &ev).unwrap();
            let d = InitialDatum::DiracBump { mass: 1.0, center: [0.1, 0.0], width: 0.05 };
            let mu = mollify(&d, &ev, 3.0, &g, 0.1).unwrap();
            let m = g.integrate(&mu);
            assert!((0.999..=1.001).contains(&m), "{m}");
            // analytic normalization of the unsmoothed bump
            let raw = InitialDatum::DiracBump { mass: 1.0, center: [0.0, 0.0], width: 0.5 };
            let f = smoothed_datum(&raw, &ev, 3.0, &g, 0.0).unwrap();
            let dens = g.sample(|x| raw.density(&ev, 3.0, x).unwrap());
            assert_relative_eq!(g.integrate(&dens), 1.0, max_relative = 1e-3);
            assert_relative_eq!(g.integrate(&f), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn mollify_is_odd() {
        let ev = euclid(2);
        let g = Grid::with_padding(3.0, 0.1, 2, &ev).unwrap();
        let d = InitialDatum::Density { gamma: 1.3, amplitude: -0.7 };
        let a = mollify(&d, &ev, 1.5, &g, 0.15).unwrap();
        let b = mollify(&d.scaled(-1.0), &ev, 1.5, &g, 0.15).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn critical_growth_exponent() {
        let ev = euclid(1);
        let d = InitialDatum::CriticalGrowth { amplitude: 2.0 };
        // q = 3/2: d = 1, γ = 2
        assert_relative_eq!(d.density(&ev, 1.5, [3.0, 0.0]).unwrap(), 32.0, max_relative = 1e-14);
    }

    #[test]
    fn plan_validation() {
        let w = Window { radius: 0.5, t1: 0.1, t2: 0.2 };
        assert!(ExhaustionPlan::geometric(2.0, 2, 0.1, 0.1, w).validate().is_ok());
        let w = Window { radius: 1.0, t1: 0.1, t2: 0.2 };
        assert!(ExhaustionPlan::geometric(2.0, 2, 0.1, 0.1, w).validate().is_err());
    }

    #[test]
    fn single_level_converges_trivially() {
        let ev = euclid(1);
        let w = Window { radius: 0.5, t1: 0.01, t2: 0.02 };
        let plan = ExhaustionPlan::geometric(2.0, 0, 0.1, 0.1, w);
        let d = InitialDatum::DiracBump { mass: 1.0, center: [0.0, 0.0], width: 0.2 };
        let cfg = StepConfig { dt0: 0.005, t_end: 0.02, ..StepConfig::default() };
        let ex = run_exhaustion(&plan, &d, 3.0, &ev, &cfg).unwrap();
        assert!(ex.report.errors.is_empty());
        assert_eq!(ex.report.status, ConvergenceStatus::Converged);
    }

    #[test]
    fn zero_datum_diagnostics() {
        let ev = euclid(1);
        let w = Window { radius: 0.5, t1: 0.01, t2: 0.04 };
        let plan = ExhaustionPlan::geometric(2.0, 1, 0.1, 0.1, w);
        let cfg = StepConfig { dt0: 0.01, t_end: 0.04, ..StepConfig::default() };
        let ex = run_exhaustion(&plan, &InitialDatum::Density { gamma: 0.0, amplitude: 0.0 }, 3.0, &ev, &cfg).unwrap();
        assert_eq!(ex.report.errors, vec![0.0]);
        let a1 = verify_a1(&ex.results, w, 3.0).unwrap();
        assert!(a1.values.iter().all(|&v| v == 0.0));
        assert_eq!(a1.delta_exponent, 3.0);
        let a2 = verify_a2(&ex.results, 0.5, &[0.01, 0.02]).unwrap();
        assert!(a2.g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn trapezoid_rules() {
        let t = [0.0, 0.5, 1.0];
        let f = [0.0, 0.5, 1.0];
        assert_relative_eq!(trapezoid(&t, &f), 0.5);
        assert_eq!(cumulative(&t, &f), vec![0.0, 0.125, 0.5]);
        assert_relative_eq!(interp(&t, &f, 0.25), 0.25);
    }
}
