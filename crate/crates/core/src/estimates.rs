//! Post-processing of runs against the a priori estimates: growth norms,
//! decay and interface exponents, the `φ_r`/`ψ_r` monitors with their
//! integral inequalities, and blow-up time scaling.
//!
//! Reports use the run's own clock `t`; time integrals start at the first
//! monitored time.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::disc::{Field, Grid};
use crate::error::{Error, Result};
use crate::exact::{self, growth_exponent_d, hypo_q_ok, kappa, MajorantParams, MajorantValue};
use crate::exec;
use crate::exhaust::{cumulative, mollify, InitialDatum};
use crate::io::fmt17;
use crate::norms::FinslerEvaluator;
use crate::stepper::{self, RunResult, RunStatus, StepConfig};

/// Least-squares line `log y = slope · log x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
    pub points: usize,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<Fit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidArgument("fit needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("fit abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok(Fit { slope, intercept, residual: (ss / n).sqrt(), points: x.len() })
}

/// Fit in log-log coordinates; all values must be positive.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<Fit> {
    if x.iter().chain(y).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Required,
    Informational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub expected: f64,
    pub tol: f64,
    pub kind: CheckKind,
}

impl Check {
    pub fn line(&self) -> String {
        let mut s = format!(
            "CHECK {} {} value={} expected={} tol={}",
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            fmt17(self.value),
            fmt17(self.expected),
            fmt17(self.tol)
        );
        if self.kind == CheckKind::Informational {
            s.push_str(" [info]");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimateReport {
    pub checks: Vec<Check>,
    pub series: Vec<Series>,
    pub fits: Vec<(String, Fit)>,
}

impl EstimateReport {
    pub fn check(&mut self, name: &str, pass: bool, value: f64, expected: f64, tol: f64, kind: CheckKind) {
        self.checks.push(Check { name: name.into(), pass, value, expected, tol, kind });
    }

    /// `|value − expected| ≤ tol`.
    pub fn near(&mut self, name: &str, value: f64, expected: f64, tol: f64) {
        self.check(name, (value - expected).abs() <= tol, value, expected, tol, CheckKind::Required);
    }

    pub fn push_series(&mut self, name: &str, t: &[f64], values: &[f64]) {
        self.series.push(Series { name: name.into(), t: t.to_vec(), values: values.to_vec() });
    }

    /// True when every required check passes.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass || c.kind == CheckKind::Informational)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{}", c.line());
        }
        s
    }

    /// Long-format CSV `series,t,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "series,t,value")?;
        for s in &self.series {
            for (t, v) in s.t.iter().zip(&s.values) {
                writeln!(out, "{},{},{}", s.name, fmt17(*t), fmt17(*v))?;
            }
        }
        Ok(())
    }
}

fn require_pme(q: f64) -> Result<()> {
    if q > 1.0 && q < 2.0 {
        Ok(())
    } else {
        Err(Error::OutOfRegime { q, regime: "porous-medium (1 < q < 2)" })
    }
}

/// Nodes ordered by `H_0`, for sums and maxima over nested balls.
struct Radial {
    order: Vec<usize>,
    r: Vec<f64>,
}

impl Radial {
    fn new(grid: &Grid, ev: &FinslerEvaluator) -> Self {
        let mut pairs: Vec<(f64, usize)> = (0..grid.n_nodes()).map(|p| (ev.dual_eval(grid.coords(p)), p)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Self { r: pairs.iter().map(|x| x.0).collect(), order: pairs.iter().map(|x| x.1).collect() }
    }

    fn count(&self, radius: f64) -> usize {
        self.r.partition_point(|&x| x < radius)
    }

    /// `∫_{B_R}|f|` at each radius.
    fn l1(&self, f: &[f64], vol: f64, radii: &[f64]) -> Vec<f64> {
        let mut acc = Vec::with_capacity(self.order.len() + 1);
        let mut s = 0.0;
        acc.push(0.0);
        for &p in &self.order {
            s += f[p].abs();
            acc.push(s);
        }
        radii.iter().map(|&r| acc[self.count(r)] * vol).collect()
    }

    /// `‖f‖_{L∞(B_R)}` at each radius.
    fn sup(&self, f: &[f64], radii: &[f64]) -> Vec<f64> {
        let mut acc = Vec::with_capacity(self.order.len() + 1);
        let mut s = 0.0f64;
        acc.push(0.0);
        for &p in &self.order {
            s = s.max(f[p].abs());
            acc.push(s);
        }
        radii.iter().map(|&r| acc[self.count(r)]).collect()
    }
}

/// `r, √2 r, 2r, …` up to and including `r_max`.
pub fn geometric_radii(r: f64, r_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x = r;
    while x < r_max * (1.0 - 1e-12) {
        out.push(x);
        x *= std::f64::consts::SQRT_2;
    }
    out.push(r_max);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthNormSample {
    pub r: f64,
    pub radii: Vec<f64>,
    /// `R^{−κ₁/d} ∫_{B_R}|f|` per radius.
    pub values: Vec<f64>,
    pub sup: f64,
}

/// `sup_{R ≥ r} R^{−κ₁/d} ∫_{B_R}|f|` over `radii` (default: factor √2 from
/// `r` to the grid's ball radius).
pub fn growth_norm(
    field: &[f64],
    grid: &Grid,
    ev: &FinslerEvaluator,
    r: f64,
    q: f64,
    radii: Option<&[f64]>,
) -> Result<GrowthNormSample> {
    require_pme(q)?;
    grid.check(field)?;
    if !(r > 0.0) {
        return Err(Error::NonpositiveRadius(r));
    }
    let radii = match radii {
        Some(x) => x.to_vec(),
        None => geometric_radii(r, grid.radius().max(r)),
    };
    Ok(growth_norm_with(&Radial::new(grid, ev), field, grid, q, r, radii))
}

fn growth_norm_with(radial: &Radial, field: &[f64], grid: &Grid, q: f64, r: f64, radii: Vec<f64>) -> GrowthNormSample {
    let e = kappa(1.0, q, grid.dim()) / growth_exponent_d(q);
    let l1 = radial.l1(field, grid.node_volume(), &radii);
    let values: Vec<f64> = radii.iter().zip(&l1).map(|(&rr, &m)| rr.powf(-e) * m).collect();
    let sup = values.iter().cloned().fold(0.0, f64::max);
    GrowthNormSample { r, radii, values, sup }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeBound {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExistenceTime {
    pub norm: GrowthNormSample,
    /// `c |||μ|||_r^{−d}`.
    pub local: TimeBound,
    /// Tail limit `a_μ` of the growth norm.
    pub a_mu: f64,
    /// `c a_μ^{−d}`, infinite when `a_μ = 0`.
    pub global: TimeBound,
}

/// `c · norm^{−d}`, infinite for a zero norm.
pub fn existence_time_from_norm(norm: f64, q: f64, c: f64) -> Result<TimeBound> {
    require_pme(q)?;
    if !(c > 0.0) {
        return Err(Error::InvalidArgument("existence-time constant must be positive".into()));
    }
    Ok(if norm == 0.0 { TimeBound::Infinite } else { TimeBound::Finite(c * norm.powf(-growth_exponent_d(q))) })
}

/// Existence times of a datum: the local `T_r` from the growth norm sampled
/// on `grid` (no cutoff), and the global bound from the tail limit `a_μ`.
/// `a_μ` is exact for the radial variants and the largest-radius sample for
/// `Custom` data.
pub fn existence_time(
    datum: &InitialDatum,
    ev: &FinslerEvaluator,
    r: f64,
    q: f64,
    c: f64,
    grid: &Grid,
) -> Result<ExistenceTime> {
    require_pme(q)?;
    let field = match datum {
        InitialDatum::Custom(f) => f.clone(),
        d => grid.sample(|x| d.density(ev, q, x).unwrap_or(0.0)),
    };
    let norm = growth_norm(&field, grid, ev, r, q, None)?;
    let d = growth_exponent_d(q);
    let n = grid.dim() as f64;
    let a_mu = match *datum {
        InitialDatum::DiracBump { .. } => 0.0,
        InitialDatum::Density { gamma, amplitude } => tail_limit(ev, amplitude, gamma, d, n)?,
        InitialDatum::CriticalGrowth { amplitude } => tail_limit(ev, amplitude, 2.0 / d, d, n)?,
        InitialDatum::Custom(_) => *norm.values.last().unwrap_or(&0.0),
    };
    let local = existence_time_from_norm(norm.sup, q, c)?;
    let global = if a_mu.is_infinite() { TimeBound::Finite(0.0) } else { existence_time_from_norm(a_mu, q, c)? };
    Ok(ExistenceTime { norm, local, a_mu, global })
}

/// `lim R^{−N−2/d} |A| ∫_{B_R}(1+H_0)^γ = |A| |B_1| N/(γ+N)` at `γ = 2/d`.
fn tail_limit(ev: &FinslerEvaluator, amplitude: f64, gamma: f64, d: f64, n: f64) -> Result<f64> {
    let crit = 2.0 / d;
    if amplitude == 0.0 || gamma < crit - 1e-12 {
        return Ok(0.0);
    }
    if gamma > crit + 1e-12 {
        return Ok(f64::INFINITY);
    }
    Ok(amplitude.abs() * ev.ball_volume(1.0)? * n / (gamma + n))
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

fn running_max(x: &[f64]) -> Vec<f64> {
    let mut m = f64::NEG_INFINITY;
    x.iter()
        .map(|&v| {
            m = m.max(v);
            m
        })
        .collect()
}

fn window_series<F: Fn(&stepper::WindowMonitor) -> f64>(result: &RunResult, radius: f64, f: F) -> Result<Vec<f64>> {
    match result.window_radius {
        Some(r) if (r - radius).abs() <= 1e-12 * radius => {}
        _ => return Err(Error::InvalidArgument(format!("run was not monitored on B_{radius}"))),
    }
    Ok(result.monitors.iter().map(|m| m.window.map(|w| f(&w)).unwrap_or(0.0)).collect())
}

/// Slope fit of `(t, y)` restricted to `[a, b]`; `None` when fewer than two
/// positive points remain.
fn fit_range(t: &[f64], y: &[f64], a: f64, b: f64) -> Option<Fit> {
    let (x, v): (Vec<f64>, Vec<f64>) =
        t.iter().zip(y).filter(|(s, v)| **s >= a && **s <= b && **v > 0.0).map(|(s, v)| (*s, *v)).unzip();
    loglog_fit(&x, &v).ok()
}

/// Records `LHS / shape` at `times`, calibrates `C` at the first time and
/// adds an informational check that later ratios stay below `1.2 C`.
fn ratio_check(rep: &mut EstimateReport, name: &str, times: &[f64], lhs: &[f64], shape: &[f64]) {
    let ratio: Vec<f64> = lhs.iter().zip(shape).map(|(a, b)| if *b > 0.0 { a / b } else { 0.0 }).collect();
    rep.push_series(&format!("{name}_lhs"), times, lhs);
    rep.push_series(&format!("{name}_shape"), times, shape);
    rep.push_series(&format!("{name}_ratio"), times, &ratio);
    let c = ratio[0];
    let worst = ratio.iter().skip(1).cloned().fold(0.0, f64::max);
    let pass = ratio.iter().all(|r| r.is_finite()) && worst <= 1.2 * c.max(0.0) || worst == 0.0;
    rep.check(&format!("{name}_ratio_stable"), pass, worst, c, 0.2 * c, CheckKind::Informational);
}

/// Fast-diffusion estimates on `B_R`. `result` must carry window monitors on
/// `B_R`; `times` are the evaluation times, the first being the calibration
/// time, and also delimit the sup-norm slope fit. `p` selects `κ_p` for the
/// predicted decay exponent `−N/(κ_p (q−1))`.
pub fn fde_report(
    result: &RunResult,
    grid: &Grid,
    ev: &FinslerEvaluator,
    q: f64,
    p: f64,
    radius: f64,
    times: &[f64],
) -> Result<EstimateReport> {
    let n = grid.dim();
    let nf = n as f64;
    if !(q > 2.0) {
        return Err(Error::OutOfRegime { q, regime: "fast diffusion (q > 2)" });
    }
    if !hypo_q_ok(q, n) && !(p > nf * (q - 2.0) / (2.0 * (q - 1.0))) {
        return Err(Error::OutOfRegime { q, regime: "q < 2(N−1)/(N−2) or p > N(q−2)/(2(q−1))" });
    }
    if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("need at least two increasing evaluation times".into()));
    }
    let t: Vec<f64> = result.monitors.iter().map(|m| m.t).collect();
    let t0 = t[0];
    let k1 = kappa(1.0, q, n);
    let kp = kappa(p, q, n);
    let radial = Radial::new(grid, ev);
    let mu = radial.l1(&result.snapshots[0].v, grid.node_volume(), &[2.0 * radius])[0];
    let e = (q - 1.0) / (q - 2.0);

    let sup_w = window_series(result, radius, |w| w.sup)?;
    let mass_w = running_max(&window_series(result, radius, |w| w.v_l1)?);
    let grad_w = window_series(result, radius, |w| w.grad_l1)?;
    let grad_int = cumulative(&t, &grad_w);

    let tail = |s: f64| (s / radius.powf(k1)).powf(e);
    let shape1 = |s: f64| {
        s.powf(-nf / (k1 * (q - 1.0))) * (mu + tail(s)).powf(2.0 / (k1 * (q - 1.0)))
            + (s / (radius * radius)).powf(1.0 / (q - 2.0))
    };
    let shape2 = |s: f64| mu + tail(s);
    let shape3 = |s: f64| {
        s.sqrt() * radius.powf(nf * (q - 2.0) / (2.0 * (q - 1.0))) * (mu + tail(s)).powf(q / (2.0 * (q - 1.0)))
            + s.powf(e) * radius.powf(nf - q / (q - 2.0))
    };
    let at = |f: &[f64]| -> Vec<f64> { times.iter().map(|&s| interp(&t, f, s)).collect() };
    let mut rep = EstimateReport::default();
    ratio_check(&mut rep, "fde1", times, &at(&sup_w), &times.iter().map(|&s| shape1(s)).collect::<Vec<_>>());
    ratio_check(&mut rep, "fde2", times, &at(&mass_w), &times.iter().map(|&s| shape2(s)).collect::<Vec<_>>());
    let g_at = at(&grad_int);
    ratio_check(&mut rep, "fde3", times, &g_at, &times.iter().map(|&s| shape3(s)).collect::<Vec<_>>());

    let sup: Vec<f64> = result.monitors.iter().map(|m| m.sup).collect();
    rep.push_series("sup", &t, &sup);
    let expected = -nf / (kp * (q - 1.0));
    let (a, b) = (times[0], *times.last().expect("nonempty"));
    if sup.iter().all(|&x| x == 0.0) {
        rep.check("sup_slope", true, 0.0, expected, 0.1, CheckKind::Required);
        rep.check("grad_int_slope", true, 0.0, 0.4, 0.0, CheckKind::Required);
        return Ok(rep);
    }
    match fit_range(&t, &sup, a, b) {
        Some(f) => {
            rep.near("sup_slope", f.slope, expected, 0.1);
            rep.fits.push(("sup".into(), f));
        }
        None => rep.check("sup_slope", false, f64::NAN, expected, 0.1, CheckKind::Required),
    }
    let shifted: Vec<f64> = times.iter().map(|s| s - t0).collect();
    match loglog_fit(&shifted, &g_at) {
        Ok(f) => {
            rep.check("grad_int_slope", f.slope >= 0.4, f.slope, 0.4, 0.0, CheckKind::Required);
            rep.fits.push(("grad_int".into(), f));
        }
        Err(_) => rep.check("grad_int_slope", false, f64::NAN, 0.4, 0.0, CheckKind::Required),
    }
    Ok(rep)
}

/// Discrete `φ_r`, `ψ_r` and `|||u(t)^{q−1}|||_r` at the snapshot times.
#[derive(Debug, Clone, PartialEq)]
pub struct PmeMonitors {
    pub t: Vec<f64>,
    pub norm: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

/// `φ_r(t) = sup_{τ≤t} sup_{R≥r} (τ−t₀)^{N/κ} R^{−2/d} ‖u(τ)‖^{q−1}_{L∞(B_R)}`
/// and `ψ_r(t) = sup_{τ≤t} |||u(τ)^{q−1}|||_r`, with `t₀` the first snapshot
/// time and radii from `r` to the ball radius.
pub fn pme_monitors(result: &RunResult, grid: &Grid, ev: &FinslerEvaluator, q: f64, r: f64) -> Result<PmeMonitors> {
    require_pme(q)?;
    let radial = Radial::new(grid, ev);
    let radii = geometric_radii(r, grid.radius().max(r));
    let n = grid.dim();
    let k = kappa(1.0, q, n);
    let d = growth_exponent_d(q);
    let t0 = result.snapshots[0].t;
    let rows: Vec<(f64, f64, f64)> = exec::map(&result.snapshots, |s| {
        let norm = growth_norm_with(&radial, &s.v, grid, q, r, radii.clone()).sup;
        let sups = radial.sup(&s.v, &radii);
        let w = (s.t - t0).powf(n as f64 / k);
        let phi = radii.iter().zip(&sups).map(|(&rr, &m)| w * rr.powf(-2.0 / d) * m).fold(0.0, f64::max);
        (s.t, norm, phi)
    });
    let t: Vec<f64> = rows.iter().map(|x| x.0).collect();
    let norm: Vec<f64> = rows.iter().map(|x| x.1).collect();
    let phi = running_max(&rows.iter().map(|x| x.2).collect::<Vec<_>>());
    let psi = running_max(&norm);
    Ok(PmeMonitors { t, norm, phi, psi })
}

/// Porous-medium estimates. Needs window monitors on `B_R`; snapshots give
/// the growth norms. `times` delimit the sup-norm slope fit and carry the
/// ratio series.
pub fn pme_report(
    result: &RunResult,
    grid: &Grid,
    ev: &FinslerEvaluator,
    q: f64,
    r: f64,
    radius: f64,
    times: &[f64],
) -> Result<EstimateReport> {
    require_pme(q)?;
    if times.len() < 2 || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("need at least two increasing evaluation times".into()));
    }
    let n = grid.dim();
    let nf = n as f64;
    let k1 = kappa(1.0, q, n);
    let d = growth_exponent_d(q);
    let pm = pme_monitors(result, grid, ev, q, r)?;
    let mu = pm.norm[0];
    let mut rep = EstimateReport::default();
    rep.push_series("growth_norm", &pm.t, &pm.norm);
    rep.push_series("phi", &pm.t, &pm.phi);
    rep.push_series("psi", &pm.t, &pm.psi);

    let ratio: Vec<f64> = pm.norm.iter().map(|x| if mu > 0.0 { x / mu } else { 0.0 }).collect();
    rep.push_series("pme1_ratio", &pm.t, &ratio);
    let worst = ratio.iter().cloned().fold(0.0, f64::max);
    rep.check("pme1_bounded", worst.is_finite(), worst, 1.0, f64::INFINITY, CheckKind::Required);
    let nondecreasing = |x: &[f64]| x.windows(2).all(|w| w[1] >= w[0]) && x.iter().all(|v| v.is_finite());
    rep.check("phi_monotone", nondecreasing(&pm.phi), *pm.phi.last().unwrap_or(&0.0), 0.0, 0.0, CheckKind::Required);
    rep.check("psi_monotone", nondecreasing(&pm.psi), *pm.psi.last().unwrap_or(&0.0), 0.0, 0.0, CheckKind::Required);

    let t: Vec<f64> = result.monitors.iter().map(|m| m.t).collect();
    let sup_w = window_series(result, radius, |w| w.sup)?;
    let grad_int = cumulative(&t, &window_series(result, radius, |w| w.grad_l1)?);
    let t0 = t[0];
    let at = |f: &[f64]| -> Vec<f64> { times.iter().map(|&s| interp(&t, f, s)).collect() };
    let shape2: Vec<f64> = times
        .iter()
        .map(|&s| s.powf(-nf / (k1 * (q - 1.0))) * radius.powf(2.0 / (d * (q - 1.0))) * mu.powf(2.0 / (k1 * (q - 1.0))))
        .collect();
    ratio_check(&mut rep, "pme2", times, &at(&sup_w), &shape2);
    let shape3: Vec<f64> = times
        .iter()
        .map(|&s| (s - t0).powf(1.0 / k1) * radius.powf(1.0 + k1 / d) * mu.powf(1.0 + d / k1))
        .collect();
    ratio_check(&mut rep, "pme3", &times[1..], &at(&grad_int)[1..], &shape3[1..]);

    let expected = -nf / (k1 * (q - 1.0));
    let tol = 0.05 * expected.abs();
    if sup_w.iter().all(|&x| x == 0.0) {
        rep.check("sup_slope", true, 0.0, expected, tol, CheckKind::Required);
    } else {
        match fit_range(&t, &sup_w, times[0], *times.last().expect("nonempty")) {
            Some(f) => {
                rep.near("sup_slope", f.slope, expected, tol);
                rep.fits.push(("sup".into(), f));
            }
            None => rep.check("sup_slope", false, f64::NAN, expected, tol, CheckKind::Required),
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportSeries {
    pub t: Vec<f64>,
    pub radius: Vec<f64>,
    pub fit: Option<Fit>,
}

/// Largest `H_0(node)` with `|u| > threshold` per snapshot (zero fields are
/// skipped) and the log-log slope against `t`. The default threshold is
/// `1e-6 · ‖u(t₀)‖∞`.
pub fn support_radius(result: &RunResult, grid: &Grid, ev: &FinslerEvaluator, threshold: Option<f64>) -> SupportSeries {
    let sup0 = result.snapshots[0].u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let thr = threshold.unwrap_or(1e-6 * sup0);
    let mut t = Vec::new();
    let mut radius = Vec::new();
    for s in &result.snapshots {
        let r = (0..grid.n_nodes())
            .filter(|&p| s.u[p].abs() > thr)
            .map(|p| ev.dual_eval(grid.coords(p)))
            .fold(f64::NEG_INFINITY, f64::max);
        if r.is_finite() {
            t.push(s.t);
            radius.push(r);
        }
    }
    let fit = loglog_fit(&t, &radius).ok();
    SupportSeries { t, radius, fit }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupScan {
    pub amplitudes: Vec<f64>,
    /// Detected blow-up time, `None` when censored at `t_end`.
    pub t_star: Vec<Option<f64>>,
    pub statuses: Vec<RunStatus>,
    pub fit: Option<Fit>,
    pub report: EstimateReport,
}

/// Runs `CriticalGrowth` data with each amplitude on `grid` and fits
/// `log t*` against `log A`; the prediction is slope `−d`. Runs that end in
/// `SolverFailed` are censored as well, and distinguished by status.
pub fn blowup_scan(
    amplitudes: &[f64],
    q: f64,
    ev: &FinslerEvaluator,
    grid: &Grid,
    delta: f64,
    cfg: &StepConfig,
) -> Result<BlowupScan> {
    require_pme(q)?;
    if amplitudes.len() < 3 || amplitudes.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidArgument("need at least three positive amplitudes".into()));
    }
    let lo = amplitudes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = amplitudes.iter().cloned().fold(0.0, f64::max);
    if hi < 4.0 * lo * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument("amplitudes must span a factor of at least 4".into()));
    }
    let runs: Vec<Result<RunResult>> = exec::map(amplitudes, |&a| {
        let v0: Field = mollify(&InitialDatum::CriticalGrowth { amplitude: a }, ev, q, grid, delta)?;
        stepper::run(grid, ev, q, &v0, cfg)
    });
    let mut t_star = Vec::new();
    let mut statuses = Vec::new();
    for r in runs {
        let r = r?;
        statuses.push(r.status);
        t_star.push(match r.status {
            RunStatus::BlowUpSuspected { t_star } => Some(t_star),
            _ => None,
        });
    }
    let (xa, yt): (Vec<f64>, Vec<f64>) =
        amplitudes.iter().zip(&t_star).filter_map(|(a, t)| t.map(|t| (*a, t))).unzip();
    if xa.is_empty() {
        return Err(Error::AllCensored);
    }
    let d = growth_exponent_d(q);
    let mut report = EstimateReport::default();
    report.push_series("t_star", &xa, &yt);
    let fit = loglog_fit(&xa, &yt).ok();
    match fit {
        Some(f) => report.near("blowup_slope", f.slope, -d, 0.15 * d),
        None => report.check("blowup_slope", false, f64::NAN, -d, 0.15 * d, CheckKind::Required),
    }
    Ok(BlowupScan { amplitudes: amplitudes.to_vec(), t_star, statuses, fit, report })
}

/// `∫_a^b τ^{−s} g(τ) dτ` with `g` linear between `g_a` and `g_b`, the
/// weight integrated exactly (`s < 1`).
fn product_step(a: f64, b: f64, s: f64, ga: f64, gb: f64) -> f64 {
    let m0 = (b.powf(1.0 - s) - a.powf(1.0 - s)) / (1.0 - s);
    let m1 = (b.powf(2.0 - s) - a.powf(2.0 - s)) / (2.0 - s);
    ga * m0 + (gb - ga) / (b - a) * (m1 - a * m0)
}

fn product_cumulative(t: &[f64], s: f64, g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut acc = 0.0;
    for k in 1..t.len() {
        acc += product_step(t[k - 1], t[k], s, g[k - 1], g[k]);
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MajorantReport {
    /// Smallest `C₂` with `φ ≤ C₁ ∫τ^{−Nd/κ} φ^{1/(q−1)} + C₂ ψ^{2/κ}`.
    pub c2_min: f64,
    /// Smallest `C₃` with `ψ ≤ C₃ |||μ|||_r + C₅ ∫τ^{1/κ−1} ψ^{1+d/κ}`.
    pub c3_min: f64,
    /// `φ_r` stays below the closed-form majorant seeded with `C₂ ψ(t_end)^{2/κ}`.
    pub phi_dominated: bool,
    /// `ψ_r` stays below the closed-form majorant seeded with `C₃ |||μ|||_r`.
    pub psi_dominated: bool,
    pub monitors: PmeMonitors,
    pub report: EstimateReport,
}

/// Minimal constants of the `φ_r`/`ψ_r` integral inequalities for given `C₁`,
/// `C₅`, and domination of the monitors by the majorants seeded with
/// `max(C₂, C₂_min)` and `max(C₃, C₃_min)`. Time runs from the first
/// snapshot.
#[allow(clippy::too_many_arguments)]
pub fn majorant_consistency(
    result: &RunResult,
    grid: &Grid,
    ev: &FinslerEvaluator,
    q: f64,
    r: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    c5: f64,
) -> Result<MajorantReport> {
    require_pme(q)?;
    let n = grid.dim();
    let k = kappa(1.0, q, n);
    let d = growth_exponent_d(q);
    let pm = pme_monitors(result, grid, ev, q, r)?;
    let t0 = pm.t[0];
    let tau: Vec<f64> = pm.t.iter().map(|s| s - t0).collect();
    let mu = pm.norm[0];

    let g1: Vec<f64> = pm.phi.iter().map(|p| p.powf(1.0 + d)).collect();
    let i1 = product_cumulative(&tau, n as f64 * d / k, &g1);
    let g5: Vec<f64> = pm.psi.iter().map(|p| p.powf(1.0 + d / k)).collect();
    let i5 = product_cumulative(&tau, 1.0 - 1.0 / k, &g5);

    let mut c2_min: f64 = 0.0;
    let mut c3_min: f64 = 0.0;
    for j in 0..tau.len() {
        let excess = pm.phi[j] - c1 * i1[j];
        if excess > 0.0 {
            c2_min = c2_min.max(excess / pm.psi[j].powf(2.0 / k));
        }
        let excess = pm.psi[j] - c5 * i5[j];
        if excess > 0.0 && mu > 0.0 {
            c3_min = c3_min.max(excess / mu);
        }
    }
    let slack = 1e-9;
    let psi_end = *pm.psi.last().expect("snapshots");
    let mp = MajorantParams::new(c2.max(c2_min) * psi_end.powf(2.0 / k), c1, q, n)?;
    let phi_dominated = tau.iter().zip(&pm.phi).all(|(&s, &p)| match exact::majorant_phi(&mp, s) {
        MajorantValue::Finite(h) => p <= h * (1.0 + slack),
        MajorantValue::BlownUp => true,
    });
    let a0 = c3.max(c3_min) * mu;
    let psi_dominated = tau.iter().zip(&pm.psi).all(|(&s, &p)| match exact::majorant_psi(a0, c5, d, k, s) {
        MajorantValue::Finite(g) => p <= g * (1.0 + slack),
        MajorantValue::BlownUp => true,
    });
    let mut report = EstimateReport::default();
    report.check("c2_min_finite", c2_min.is_finite(), c2_min, 0.0, f64::INFINITY, CheckKind::Required);
    report.check("c3_min_finite", c3_min.is_finite(), c3_min, 0.0, f64::INFINITY, CheckKind::Required);
    report.check("phi_dominated", phi_dominated, c2.max(c2_min), 0.0, 0.0, CheckKind::Required);
    report.check("psi_dominated", psi_dominated, c3.max(c3_min), 0.0, 0.0, CheckKind::Required);
    report.push_series("phi", &pm.t, &pm.phi);
    report.push_series("psi", &pm.t, &pm.psi);
    Ok(MajorantReport { c2_min, c3_min, phi_dominated, psi_dominated, monitors: pm, report })
}
