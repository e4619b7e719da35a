//! Backward-Euler integration of `∂t β(u) = Δ_H u` on a fixed ball with zero
//! Dirichlet data.
//!
//! Each step solves `v − Δt L(u) = v_prev` with `v = β(u)` by semismooth
//! Newton and a backtracking line search. The equation is written in `v`, so
//! `Σ v h^N` changes only through boundary fluxes and the solver residual.
//! The Newton unknown is `u` when `q ≥ 2` and `v` when `q < 2`; in both
//! cases the linear system is `(diag b + Δt/h^N · ∇²E) w = −F`, which is
//! symmetric positive definite.

use crate::disc::{self, beta, beta_inverse, Field, Grid};
use crate::error::{Error, Result};
use crate::exec;
use crate::norms::{FinslerEvaluator, Vec2};

#[derive(Debug, Clone, PartialEq)]
pub struct StepConfig {
    pub dt0: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Absolute tolerance on the sup-norm of the step residual.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Regularization of the Jacobian diagonal; `None` selects
    /// `1e-8 (1 + ‖u‖∞)` per step.
    pub jacobian_eps: Option<f64>,
    /// Maximum number of step halvings in the line search.
    pub max_halvings: usize,
    pub dt_min: f64,
    /// Blow-up threshold on `‖u‖∞` over the whole ball.
    pub sup_cap: f64,
    pub save_every: usize,
    /// Factor applied to `Δt` after each accepted step.
    pub dt_growth: f64,
    pub dt_max: f64,
    /// Radius of the interior window for the window monitors.
    pub window_radius: Option<f64>,
    /// Declare blow-up once the window sup-norm exceeds this multiple of its
    /// initial value. Needs `window_radius`.
    pub blowup_growth: Option<f64>,
    /// Relative tolerance of the inner conjugate-gradient solves.
    pub linear_tol: f64,
    /// Store `u` on the window nodes after every step.
    pub record_window: bool,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt0: 1e-3,
            t_start: 0.0,
            t_end: 1.0,
            newton_tol: 1e-10,
            max_newton: 50,
            jacobian_eps: None,
            max_halvings: 30,
            dt_min: 1e-10,
            sup_cap: 1e8,
            save_every: 1,
            dt_growth: 1.0,
            dt_max: f64::INFINITY,
            window_radius: None,
            blowup_growth: None,
            linear_tol: 1e-10,
            record_window: false,
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("step config: {what}")));
        if !(self.dt0 > 0.0 && self.newton_tol > 0.0 && self.dt_min > 0.0 && self.sup_cap > 0.0) {
            return bad("dt0, newton_tol, dt_min and sup_cap must be positive");
        }
        if !(self.t_end > self.t_start) || self.t_start < 0.0 {
            return bad("need 0 <= t_start < t_end");
        }
        if !(self.dt_min < self.dt0) {
            return bad("dt_min must be below dt0");
        }
        if self.max_newton == 0 || self.save_every == 0 {
            return bad("max_newton and save_every must be at least 1");
        }
        if !(self.dt_growth >= 1.0) || !(self.dt_max > 0.0) {
            return bad("dt_growth must be >= 1 and dt_max positive");
        }
        if (self.blowup_growth.is_some() || self.record_window) && self.window_radius.is_none() {
            return bad("blowup_growth and record_window need window_radius");
        }
        if !(self.linear_tol > 0.0 && self.linear_tol < 1.0) {
            return bad("linear_tol must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Newton diagnostics of one implicit step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub v: Field,
    pub u: Field,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unknown {
    U,
    V,
}

fn residual(grid: &Grid, ev: &FinslerEvaluator, v: &[f64], u: &[f64], v_prev: &[f64], dt: f64) -> Field {
    let lap = disc::finsler_laplacian(grid, ev, u).expect("conforming field");
    let mut f = grid.zeros();
    exec::fill(&mut f, |p| {
        if grid.is_interior(p) {
            v[p] - v_prev[p] - dt * lap[p]
        } else {
            0.0
        }
    });
    f
}

fn sup_norm(x: &[f64]) -> f64 {
    exec::max(x.len(), |i| x[i].abs())
}

fn l2_norm(x: &[f64]) -> f64 {
    exec::sum(x.len(), |i| x[i] * x[i]).sqrt()
}

/// One backward-Euler step from `v_prev` with step `dt`.
pub fn implicit_step(
    grid: &Grid,
    ev: &FinslerEvaluator,
    q: f64,
    v_prev: &[f64],
    dt: f64,
    cfg: &StepConfig,
) -> Result<StepOutcome> {
    grid.check(v_prev)?;
    if !(q > 1.0) {
        return Err(Error::OutOfRegime { q, regime: "q > 1" });
    }
    let mode = if q < 2.0 { Unknown::V } else { Unknown::U };
    let mut v: Field = v_prev.to_vec();
    for (p, x) in v.iter_mut().enumerate() {
        if !grid.is_interior(p) {
            *x = 0.0;
        }
    }
    let mut u = disc::beta_inverse_field(q, &v);
    let eps = cfg.jacobian_eps.unwrap_or(1e-8 * (1.0 + sup_norm(&u)));
    let scale = dt / grid.node_volume();
    let interior = grid.interior();

    let mut f = residual(grid, ev, &v, &u, v_prev, dt);
    let mut r_sup = sup_norm(&f);
    let mut r_l2 = l2_norm(&f);
    for it in 0..cfg.max_newton {
        if r_sup <= cfg.newton_tol {
            return Ok(StepOutcome { v, u, iterations: it, residual: r_sup });
        }
        let mut b = grid.zeros();
        exec::fill(&mut b, |p| {
            if !grid.is_interior(p) {
                return 1.0;
            }
            match mode {
                Unknown::U if q == 2.0 => 1.0,
                Unknown::U => (q - 1.0) * (u[p].abs() + eps).powf(q - 2.0),
                Unknown::V => (q - 1.0) * (v[p].abs() + eps).powf(-(2.0 - q) / (q - 1.0)),
            }
        });
        let jac = disc::assemble_jacobian(grid, ev, &u, &b, scale, eps).to_csr(grid);
        let rhs: Vec<f64> = interior.iter().map(|&p| -f[p]).collect();
        let w = if grid.dim() == 1 {
            jac.solve_tridiagonal(&rhs)?
        } else {
            jac.solve_pcg(&rhs, cfg.linear_tol, 20_000)?.0
        };
        // in v-mode the Newton update of v is b∘w
        let mut dir = grid.zeros();
        for (k, &p) in interior.iter().enumerate() {
            dir[p] = match mode {
                Unknown::U => w[k],
                Unknown::V => b[p] * w[k],
            };
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.max_halvings {
            let (v_try, u_try) = match mode {
                Unknown::U => {
                    let u_try: Field = u.iter().zip(&dir).map(|(a, d)| a + lambda * d).collect();
                    (disc::beta_field(q, &u_try), u_try)
                }
                Unknown::V => {
                    let v_try: Field = v.iter().zip(&dir).map(|(a, d)| a + lambda * d).collect();
                    let u_try = disc::beta_inverse_field(q, &v_try);
                    (v_try, u_try)
                }
            };
            let f_try = residual(grid, ev, &v_try, &u_try, v_prev, dt);
            let l2 = l2_norm(&f_try);
            if l2 < r_l2 || sup_norm(&f_try) <= cfg.newton_tol {
                v = v_try;
                u = u_try;
                r_l2 = l2;
                r_sup = sup_norm(&f_try);
                f = f_try;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NonConvergence { iterations: it + 1, residual: r_sup });
        }
    }
    if r_sup <= cfg.newton_tol {
        return Ok(StepOutcome { v, u, iterations: cfg.max_newton, residual: r_sup });
    }
    Err(Error::NonConvergence { iterations: cfg.max_newton, residual: r_sup })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Completed,
    /// `t_star` is the detected blow-up time.
    BlowUpSuspected { t_star: f64 },
    SolverFailed { t: f64 },
}

/// Quantities restricted to `B_{R_w}` for a window radius `R_w`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindowMonitor {
    pub sup: f64,
    /// `∫|u|`.
    pub u_l1: f64,
    /// `∫|v|`.
    pub v_l1: f64,
    /// `∫H(∇u)`.
    pub grad_l1: f64,
    /// `∫|v|²`.
    pub v_sq: f64,
    /// `∫H(∇u)²`.
    pub grad_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monitor {
    pub t: f64,
    /// `Σ v h^N`.
    pub mass: f64,
    /// `‖u‖∞`.
    pub sup: f64,
    /// `Σ_faces H(∇u) w`.
    pub grad_l1: f64,
    pub energy: f64,
    pub window: Option<WindowMonitor>,
}

/// `u` restricted to the window nodes (in index order) at time `t`.
#[derive(Debug, Clone)]
pub struct WindowField {
    pub t: f64,
    pub u: Field,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub u: Field,
    pub v: Field,
}

/// Output of [`run`]: monitors after every accepted step, field snapshots
/// every `save_every` steps (and at both ends), and the final status.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub q: f64,
    pub monitors: Vec<Monitor>,
    pub snapshots: Vec<Snapshot>,
    pub status: RunStatus,
    pub steps: usize,
    pub newton_iterations: usize,
    pub rejected_steps: usize,
    pub window_radius: Option<f64>,
    /// Window node indices, set when window fields are recorded.
    pub window_nodes: Vec<usize>,
    pub window_series: Vec<WindowField>,
}

impl RunResult {
    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("run stores the initial snapshot")
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    /// Wraps externally computed `u` fields (e.g. an exact solution) as a run.
    pub fn synthetic(
        grid: &Grid,
        ev: &FinslerEvaluator,
        q: f64,
        times: &[f64],
        fields: Vec<Field>,
        window: Option<f64>,
    ) -> Result<Self> {
        let wm = window.map(|r| WindowSets::new(grid, ev, r));
        let mut monitors = Vec::new();
        let mut snapshots = Vec::new();
        for (&t, u) in times.iter().zip(fields) {
            grid.check(&u)?;
            let v = disc::beta_field(q, &u);
            monitors.push(monitor(grid, ev, t, &u, &v, wm.as_ref()));
            snapshots.push(Snapshot { t, u, v });
        }
        Ok(Self {
            q,
            monitors,
            snapshots,
            status: RunStatus::Completed,
            steps: times.len().saturating_sub(1),
            newton_iterations: 0,
            rejected_steps: 0,
            window_radius: window,
            window_nodes: Vec::new(),
            window_series: Vec::new(),
        })
    }
}

/// Node and face sets of an observation window.
#[derive(Debug, Clone)]
pub(crate) struct WindowSets {
    nodes: Vec<usize>,
    x_faces: Vec<usize>,
    y_faces: Vec<usize>,
}

impl WindowSets {
    pub(crate) fn new(grid: &Grid, ev: &FinslerEvaluator, radius: f64) -> Self {
        let nodes = grid.nodes_within(ev, radius);
        let faces = |axis: usize| -> Vec<usize> {
            (0..grid.n_nodes())
                .filter(|&p| {
                    let (i, j) = grid.ij(p);
                    let exists = if axis == 0 { i + 1 < grid.n_side() } else { j + 1 < grid.n_side() };
                    exists && ev.in_ball(grid.face_midpoint(p, axis), radius)
                })
                .collect()
        };
        let y_faces = if grid.dim() == 2 { faces(1) } else { Vec::new() };
        Self { nodes, x_faces: faces(0), y_faces }
    }

    pub(crate) fn measure(&self, grid: &Grid, ev: &FinslerEvaluator, u: &[f64], v: &[f64]) -> WindowMonitor {
        let vol = grid.node_volume();
        let w = grid.face_weight();
        let g = disc::face_gradients(grid, u).expect("conforming field");
        let n = &self.nodes;
        let gsum = |pow: i32| {
            let fx = exec::sum(self.x_faces.len(), |k| ev.eval(g.x[self.x_faces[k]]).powi(pow));
            let fy = exec::sum(self.y_faces.len(), |k| ev.eval(g.y[self.y_faces[k]]).powi(pow));
            (fx + fy) * w
        };
        WindowMonitor {
            sup: exec::max(n.len(), |k| u[n[k]].abs()),
            u_l1: exec::sum(n.len(), |k| u[n[k]].abs()) * vol,
            v_l1: exec::sum(n.len(), |k| v[n[k]].abs()) * vol,
            grad_l1: gsum(1),
            v_sq: exec::sum(n.len(), |k| v[n[k]] * v[n[k]]) * vol,
            grad_sq: gsum(2),
        }
    }
}

fn monitor(grid: &Grid, ev: &FinslerEvaluator, t: f64, u: &[f64], v: &[f64], wm: Option<&WindowSets>) -> Monitor {
    Monitor {
        t,
        mass: grid.integrate(v),
        sup: sup_norm(u),
        grad_l1: disc::gradient_l1(grid, ev, u).expect("conforming field"),
        energy: disc::discrete_energy(grid, ev, u).expect("conforming field"),
        window: wm.map(|w| w.measure(grid, ev, u, v)),
    }
}

/// Marches `v_init` from `t_start` to `t_end`. Failed Newton solves halve
/// the step; the run stops early on suspected blow-up or when the step
/// falls below `dt_min`.
pub fn run(grid: &Grid, ev: &FinslerEvaluator, q: f64, v_init: &[f64], cfg: &StepConfig) -> Result<RunResult> {
    grid.check(v_init)?;
    cfg.validate()?;
    let wm = cfg.window_radius.map(|r| WindowSets::new(grid, ev, r));
    let mut v: Field = v_init
        .iter()
        .enumerate()
        .map(|(p, &x)| if grid.is_interior(p) { x } else { 0.0 })
        .collect();
    let mut u = disc::beta_inverse_field(q, &v);
    let mut t = cfg.t_start;
    let mut monitors = vec![monitor(grid, ev, t, &u, &v, wm.as_ref())];
    let mut snapshots = vec![Snapshot { t, u: u.clone(), v: v.clone() }];
    let window0 = monitors[0].window.map(|w| w.sup).unwrap_or(0.0);
    let window_nodes: Vec<usize> = match (&wm, cfg.record_window) {
        (Some(w), true) => w.nodes.clone(),
        _ => Vec::new(),
    };
    let restrict = |u: &[f64]| -> Field { window_nodes.iter().map(|&p| u[p]).collect() };
    let mut window_series = Vec::new();
    if cfg.record_window {
        window_series.push(WindowField { t, u: restrict(&u) });
    }
    let mut dt = cfg.dt0;
    let mut status = RunStatus::Completed;
    let (mut steps, mut newton_iterations, mut rejected) = (0usize, 0usize, 0usize);
    let mut last_saved = 0usize;
    let span = cfg.t_end - cfg.t_start;
    while cfg.t_end - t > 1e-12 * span {
        let mut dt_try = dt.min(cfg.t_end - t);
        if cfg.t_end - t - dt_try < 1e-3 * dt_try {
            dt_try = cfg.t_end - t;
        }
        match implicit_step(grid, ev, q, &v, dt_try, cfg) {
            Ok(out) => {
                t += dt_try;
                steps += 1;
                newton_iterations += out.iterations;
                v = out.v;
                u = out.u;
                let m = monitor(grid, ev, t, &u, &v, wm.as_ref());
                let prev = *monitors.last().expect("initial monitor");
                monitors.push(m);
                if cfg.record_window {
                    window_series.push(WindowField { t, u: restrict(&u) });
                }
                if steps % cfg.save_every == 0 {
                    snapshots.push(Snapshot { t, u: u.clone(), v: v.clone() });
                    last_saved = steps;
                }
                if m.sup > cfg.sup_cap {
                    status = RunStatus::BlowUpSuspected { t_star: t };
                    break;
                }
                if let (Some(growth), Some(w)) = (cfg.blowup_growth, m.window) {
                    let level = growth * window0;
                    if window0 > 0.0 && w.sup > level {
                        // linear interpolation of the crossing inside the step
                        let ws = prev.window.map(|p| p.sup).unwrap_or(window0);
                        let frac = ((level - ws) / (w.sup - ws)).clamp(0.0, 1.0);
                        status = RunStatus::BlowUpSuspected { t_star: prev.t + frac * (t - prev.t) };
                        break;
                    }
                }
                dt = (dt_try * cfg.dt_growth).min(cfg.dt_max).max(dt.min(cfg.dt_max));
                if cfg.dt_growth == 1.0 {
                    dt = cfg.dt0.min(cfg.dt_max);
                }
            }
            Err(Error::NonConvergence { iterations, .. }) => {
                rejected += 1;
                dt = dt_try * 0.5;
                if dt < cfg.dt_min {
                    // a stalled line search (fewer iterations than allowed) at a
                    // tiny step is read as loss of solvability
                    status = if iterations < cfg.max_newton {
                        RunStatus::BlowUpSuspected { t_star: t }
                    } else {
                        RunStatus::SolverFailed { t }
                    };
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    if last_saved != steps {
        snapshots.push(Snapshot { t, u, v });
    }
    Ok(RunResult {
        q,
        monitors,
        snapshots,
        status,
        steps,
        newton_iterations,
        rejected_steps: rejected,
        window_radius: cfg.window_radius,
        window_nodes,
        window_series,
    })
}

/// Smooth space-time test function `ψ(x,t) = φ(x) θ(t)` with
/// `φ = cos²(π|x−c|/(2ρ))` on the Euclidean ball `|x−c| < ρ` and
/// `θ(t) = 1 − ½ ((t − t₀)/(T − t₀))²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestBump {
    pub center: Vec2,
    pub radius: f64,
    /// End `T` of the time ramp; must not precede the last snapshot.
    pub t_final: f64,
}

impl TestBump {
    fn dist(&self, x: Vec2) -> (f64, Vec2) {
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        (d[0].hypot(d[1]), d)
    }

    pub fn space(&self, x: Vec2) -> f64 {
        let (r, _) = self.dist(x);
        if r >= self.radius {
            0.0
        } else {
            (std::f64::consts::FRAC_PI_2 * r / self.radius).cos().powi(2)
        }
    }

    pub fn space_grad(&self, x: Vec2) -> Vec2 {
        let (r, d) = self.dist(x);
        if r >= self.radius || r == 0.0 {
            return [0.0, 0.0];
        }
        let k = std::f64::consts::PI / self.radius;
        let s = -0.5 * k * (k * r).sin() / r;
        [s * d[0], s * d[1]]
    }

    fn ramp(&self, t: f64, t0: f64) -> (f64, f64) {
        let span = self.t_final - t0;
        let s = (t - t0) / span;
        (1.0 - 0.5 * s * s, -s / span)
    }
}

/// Evaluates the weak formulation
/// `−∫∫ v ∂tψ + ∫ v(t)ψ(t) − ∫ ψ(0) dμ + ∫∫ a(∇u)·∇ψ`
/// on the stored snapshots (trapezoid in time, cell and diamond midpoint
/// rules in space). The initial snapshot plays the role of `μ`.
pub fn residual_weakform(
    result: &RunResult,
    bump: &TestBump,
    grid: &Grid,
    ev: &FinslerEvaluator,
    q: f64,
) -> Result<f64> {
    let _ = q;
    let reach = bump.radius + 2.0 * grid.h();
    for p in 0..grid.n_nodes() {
        let (r, _) = bump.dist(grid.coords(p));
        if r < reach && !grid.is_interior(p) {
            return Err(Error::BumpTouchesBoundary);
        }
    }
    let snaps = &result.snapshots;
    let t0 = snaps[0].t;
    let t_last = snaps.last().expect("snapshots").t;
    if bump.t_final < t_last || bump.t_final <= t0 {
        return Err(Error::InvalidArgument("bump ramp must cover the run".into()));
    }
    let vol = grid.node_volume();
    let w = grid.face_weight();
    let phi = grid.sample(|x| bump.space(x));
    let n = grid.n_nodes();
    let mut gx = vec![[0.0; 2]; n];
    exec::fill(&mut gx, |p| bump.space_grad(grid.face_midpoint(p, 0)));
    let mut gy = vec![[0.0; 2]; if grid.dim() == 2 { n } else { 0 }];
    exec::fill(&mut gy, |p| bump.space_grad(grid.face_midpoint(p, 1)));

    let pair = |s: &Snapshot| -> (f64, f64) {
        let vphi = exec::sum(n, |p| s.v[p] * phi[p]) * vol;
        let g = disc::face_gradients(grid, &s.u).expect("conforming field");
        let fx = exec::sum(n, |p| crate::norms::dot(ev.flux(g.x[p]), gx[p]));
        let fy = exec::sum(gy.len(), |p| crate::norms::dot(ev.flux(g.y[p]), gy[p]));
        (vphi, (fx + fy) * w)
    };
    let vals: Vec<(f64, f64)> = exec::map(snaps, pair);
    let mut time_term = 0.0;
    let mut flux_term = 0.0;
    for k in 1..snaps.len() {
        let (ta, tb) = (snaps[k - 1].t, snaps[k].t);
        let (tha, dtha) = bump.ramp(ta, t0);
        let (thb, dthb) = bump.ramp(tb, t0);
        let dt = tb - ta;
        time_term += 0.5 * dt * (vals[k - 1].0 * dtha + vals[k].0 * dthb);
        flux_term += 0.5 * dt * (vals[k - 1].1 * tha + vals[k].1 * thb);
    }
    let (th_end, _) = bump.ramp(t_last, t0);
    let (th0, _) = bump.ramp(t0, t0);
    let end_term = vals.last().expect("snapshots").0 * th_end;
    let init_term = vals[0].0 * th0;
    Ok(-time_term + end_term - init_term + flux_term)
}

/// True when `sup_t ‖v(t)‖∞ ≤ M (1 + 1e-8)` over all monitored times.
pub fn max_principle_check(result: &RunResult, bound: f64) -> bool {
    let q = result.q;
    result
        .monitors
        .iter()
        .all(|m| beta(q, m.sup) <= bound * (1.0 + 1e-8))
}

/// `u` recovered from a `v` field.
pub fn u_of_v(q: f64, v: &[f64]) -> Field {
    v.iter().map(|&x| beta_inverse(q, x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::NormSpec;

    fn setup_1d(h: f64) -> (Grid, FinslerEvaluator) {
        let ev = FinslerEvaluator::new(NormSpec::euclidean(1)).unwrap();
        let grid = Grid::with_padding(1.0, h, 3, &ev).unwrap();
        (grid, ev)
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let (g, ev) = setup_1d(0.05);
        for q in [1.5, 2.0, 3.0] {
            let out = implicit_step(&g, &ev, q, &g.zeros(), 0.01, &StepConfig::default()).unwrap();
            assert!(out.v.iter().all(|&x| x == 0.0));
            assert_eq!(out.iterations, 0);
        }
    }

    #[test]
    fn residual_is_below_tolerance() {
        let (g, ev) = setup_1d(1.0 / 32.0);
        let v0 = g.sample(|x| (1.0 - x[0] * x[0]).max(0.0).powi(2));
        for q in [1.5, 3.0] {
            let cfg = StepConfig { newton_tol: 1e-12, ..StepConfig::default() };
            let out = implicit_step(&g, &ev, q, &v0, 0.01, &cfg).unwrap();
            let f = residual(&g, &ev, &out.v, &out.u, &v0, 0.01);
            assert!(sup_norm(&f) <= 1e-12);
            for p in 0..g.n_nodes() {
                assert!((out.v[p] - beta(q, out.u[p])).abs() <= 1e-14 * (1.0 + out.v[p].abs()));
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(StepConfig::default().validate().is_ok());
        let bad = StepConfig { dt_min: 1.0, dt0: 0.1, ..StepConfig::default() };
        assert!(bad.validate().is_err());
        let bad = StepConfig { blowup_growth: Some(10.0), ..StepConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn max_principle_examples() {
        let (g, ev) = setup_1d(0.05);
        let cfg = StepConfig { t_end: 0.05, dt0: 0.01, ..StepConfig::default() };
        let zero = run(&g, &ev, 3.0, &g.zeros(), &cfg).unwrap();
        assert!(max_principle_check(&zero, 0.0));
        let v0 = g.sample(|x| (1.0 - 4.0 * x[0] * x[0]).max(0.0));
        let res = run(&g, &ev, 3.0, &v0, &cfg).unwrap();
        assert!(max_principle_check(&res, 1.0));
        let mut fake = res.clone();
        fake.monitors[1].sup = 2.0;
        assert!(!max_principle_check(&fake, 1.0));
    }

    #[test]
    fn bump_near_boundary_is_rejected() {
        let (g, ev) = setup_1d(0.05);
        let res = RunResult::synthetic(&g, &ev, 1.5, &[0.0, 1.0], vec![g.zeros(), g.zeros()], None).unwrap();
        let bump = TestBump { center: [0.8, 0.0], radius: 0.3, t_final: 2.0 };
        assert_eq!(residual_weakform(&res, &bump, &g, &ev, 1.5), Err(Error::BumpTouchesBoundary));
        let inside = TestBump { center: [0.0, 0.0], radius: 0.3, t_final: 2.0 };
        assert_eq!(residual_weakform(&res, &inside, &g, &ev, 1.5).unwrap(), 0.0);
    }
}
