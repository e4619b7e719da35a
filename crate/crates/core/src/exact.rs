//! Closed-form objects: structural exponents, the ZKB self-similar solution,
//! the ODE majorants used in the porous-medium a priori estimates, and a
//! numerical comparison principle for integral inequalities.

use crate::error::{Error, Result};
use crate::norms::{FinslerEvaluator, Vec2};

/// `κ_p = 2p − N(q−2)/(q−1)`.
pub fn kappa(p: f64, q: f64, n: usize) -> f64 {
    2.0 * p - n as f64 * (q - 2.0) / (q - 1.0)
}

/// `d = (2−q)/(q−1)`, positive in the porous-medium range.
pub fn growth_exponent_d(q: f64) -> f64 {
    (2.0 - q) / (q - 1.0)
}

/// Local-boundedness condition for fast diffusion, `q < 2(N−1)/(N−2)_+`.
pub fn hypo_q_ok(q: f64, n: usize) -> bool {
    if n <= 2 {
        return true;
    }
    let n = n as f64;
    q < 2.0 * (n - 1.0) / (n - 2.0)
}

/// Parameters of the ZKB solution
/// `U(x,t) = t^{−α/(q−1)} (C − k H_0(x)² t^{−2β})_+^{1/(2−q)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZkbParams {
    pub q: f64,
    pub dim: usize,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub d: f64,
}

impl ZkbParams {
    pub fn new(q: f64, dim: usize, c: f64) -> Result<Self> {
        if !(q > 1.0 && q < 2.0) {
            return Err(Error::OutOfRegime { q, regime: "porous-medium (1 < q < 2)" });
        }
        if !(c > 0.0) {
            return Err(Error::InvalidArgument(format!("ZKB constant C must be positive, got {c}")));
        }
        let n = dim as f64;
        let d = growth_exponent_d(q);
        let alpha = n / (2.0 + n * d);
        let beta = alpha / n;
        let k = alpha * (2.0 - q) / (2.0 * n);
        Ok(Self { q, dim, c, alpha, beta, k, d })
    }

    /// Radius `√(C/k) t^β` of the support in the dual norm.
    pub fn support_radius(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::NonpositiveTime(t));
        }
        Ok((self.c / self.k).sqrt() * t.powf(self.beta))
    }

    /// Value of `u` at a point with `H_0(x) = r`.
    pub fn profile(&self, r: f64, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::NonpositiveTime(t));
        }
        let bracket = self.c - self.k * r * r * t.powf(-2.0 * self.beta);
        if bracket <= 0.0 {
            return Ok(0.0);
        }
        Ok(t.powf(-self.alpha / (self.q - 1.0)) * bracket.powf(1.0 / (2.0 - self.q)))
    }

    pub fn eval(&self, ev: &FinslerEvaluator, x: Vec2, t: f64) -> Result<f64> {
        if ev.dim() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "norm dimension {} does not match ZKB dimension {}",
                ev.dim(),
                self.dim
            )));
        }
        self.profile(ev.dual_eval(x), t)
    }

    /// Midpoint quadrature of `u^{q−1}` over the support; independent of `t`.
    pub fn mass(&self, ev: &FinslerEvaluator, t: f64, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::NonpositiveSpacing(h));
        }
        let rho = self.support_radius(t)?;
        let ext = ev.dual_extent();
        let cells = |e: f64| ((rho * e / h).ceil() as i64).max(1);
        let (nx, ny) = (cells(ext[0]), if self.dim == 2 { cells(ext[1]) } else { 0 });
        let vol = h.powi(self.dim as i32);
        let mut total = 0.0;
        for j in -ny..ny.max(1) {
            let y = if self.dim == 2 { (j as f64 + 0.5) * h } else { 0.0 };
            let mut row = 0.0;
            for i in -nx..nx {
                let x = (i as f64 + 0.5) * h;
                row += self.eval(ev, [x, y], t)?.powf(self.q - 1.0);
            }
            total += row;
        }
        Ok(total * vol)
    }
}

/// Majorant value: finite, or past the zero of the bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MajorantValue {
    Finite(f64),
    BlownUp,
}

impl MajorantValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::BlownUp => None,
        }
    }
}

/// Data of `H(t) = [a₀^{−d} − (dκ/2) C₁ t^{2/κ}]_+^{−1/d}`, the solution of
/// `H' = C₁ t^{−Nd/κ} H^{1/(q−1)}`, `H(0) = a₀`, with `κ = 2 + Nd`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorantParams {
    pub a0: f64,
    pub c1: f64,
    pub d: f64,
    pub kappa: f64,
    pub dim: usize,
}

impl MajorantParams {
    pub fn new(a0: f64, c1: f64, q: f64, dim: usize) -> Result<Self> {
        if !(q > 1.0 && q < 2.0) {
            return Err(Error::OutOfRegime { q, regime: "porous-medium (1 < q < 2)" });
        }
        if a0 < 0.0 || c1 < 0.0 {
            return Err(Error::InvalidArgument("majorant data must be nonnegative".into()));
        }
        let d = growth_exponent_d(q);
        Ok(Self { a0, c1, d, kappa: kappa(1.0, q, dim), dim })
    }

    /// Exponent `1/(q−1) = 1 + d` of the right-hand side of the ODE.
    pub fn power(&self) -> f64 {
        1.0 + self.d
    }

    /// Time weight exponent `Nd/κ`.
    pub fn time_exponent(&self) -> f64 {
        self.dim as f64 * self.d / self.kappa
    }

    /// Zero of the bracket; `None` if it never closes.
    pub fn blowup_time(&self) -> Option<f64> {
        if self.c1 == 0.0 || self.a0 == 0.0 {
            return None;
        }
        let t = (self.a0.powf(-self.d) / (0.5 * self.d * self.kappa * self.c1))
            .powf(0.5 * self.kappa);
        Some(t)
    }
}

pub fn majorant_phi(mp: &MajorantParams, t: f64) -> MajorantValue {
    if mp.a0 == 0.0 || t == 0.0 || mp.c1 == 0.0 {
        return MajorantValue::Finite(mp.a0);
    }
    let bracket = mp.a0.powf(-mp.d) - 0.5 * mp.d * mp.kappa * mp.c1 * t.powf(2.0 / mp.kappa);
    if bracket <= 0.0 {
        MajorantValue::BlownUp
    } else {
        MajorantValue::Finite(bracket.powf(-1.0 / mp.d))
    }
}

/// `G(t) = [a₀^{−d/κ} − C₅ d t^{1/κ}]_+^{−κ/d}`, the solution of
/// `G' = C₅ t^{1/κ−1} G^{1+d/κ}`, `G(0) = a₀`.
pub fn majorant_psi(a0: f64, c5: f64, d: f64, kappa: f64, t: f64) -> MajorantValue {
    if a0 == 0.0 || t == 0.0 || c5 == 0.0 {
        return MajorantValue::Finite(a0);
    }
    let bracket = a0.powf(-d / kappa) - c5 * d * t.powf(1.0 / kappa);
    if bracket <= 0.0 {
        MajorantValue::BlownUp
    } else {
        MajorantValue::Finite(bracket.powf(-kappa / d))
    }
}

/// Bracket zero of [`majorant_psi`]: `a₀^{−d} / (C₅ d)^κ`.
pub fn majorant_psi_blowup_time(a0: f64, c5: f64, d: f64, kappa: f64) -> Option<f64> {
    if a0 == 0.0 || c5 == 0.0 {
        return None;
    }
    Some(a0.powf(-d) / (c5 * d).powf(kappa))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub holds: bool,
    pub first_violation: Option<f64>,
    pub steps: usize,
}

/// Integrates `φ' = k(t) f(φ)` from `a_minus` and `a_plus` by explicit Euler
/// with step `h` and checks that the lower trajectory stays strictly below
/// the upper one on `[0, T]`. The weight is sampled at step midpoints so a
/// weight singular at `t = 0` is allowed. First-order accurate; meant as a
/// checking tool, not as an integrator.
pub fn ode_compare<F, K>(f: F, k: K, a_minus: f64, a_plus: f64, t_end: f64, h: f64) -> Result<Comparison>
where
    F: Fn(f64) -> f64,
    K: Fn(f64) -> f64,
{
    if !(a_minus < a_plus) {
        return Err(Error::InvalidArgument(format!(
            "comparison needs a_minus < a_plus, got {a_minus} and {a_plus}"
        )));
    }
    if !(h > 0.0 && t_end >= 0.0) {
        return Err(Error::InvalidArgument("step and horizon must be positive".into()));
    }
    let steps = (t_end / h).ceil() as usize;
    let (mut lo, mut hi) = (a_minus, a_plus);
    for n in 0..steps {
        let t = n as f64 * h;
        let dt = h.min(t_end - t);
        let w = k(t + 0.5 * dt);
        lo += dt * w * f(lo);
        hi += dt * w * f(hi);
        let t_next = t + dt;
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::StepTooLarge(t_next));
        }
        if lo >= hi {
            return Ok(Comparison { holds: false, first_violation: Some(t_next), steps: n + 1 });
        }
    }
    Ok(Comparison { holds: true, first_violation: None, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::NormSpec;
    use approx::assert_relative_eq;

    fn euclid1() -> FinslerEvaluator {
        FinslerEvaluator::new(NormSpec::euclidean(1)).unwrap()
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(1.0, 2.0, 2), 2.0);
        assert_relative_eq!(kappa(1.0, 3.0, 2), 1.0);
        assert_relative_eq!(kappa(1.0, 4.0, 3), 0.0, epsilon = 1e-15);
        // affine in p with slope 2
        assert_relative_eq!(kappa(2.5, 3.0, 2) - kappa(1.5, 3.0, 2), 2.0);
    }

    #[test]
    fn hypo_q_examples() {
        assert!(hypo_q_ok(3.0, 2));
        assert!(!hypo_q_ok(4.0, 3));
        assert!(hypo_q_ok(3.9, 3));
    }

    #[test]
    fn zkb_parameter_examples() {
        let p = ZkbParams::new(1.5, 1, 1.0 / 12.0).unwrap();
        assert_relative_eq!(p.alpha, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(p.beta, 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(p.k, 1.0 / 12.0, max_relative = 1e-15);
        assert_relative_eq!(p.d, 1.0);
        // N = 2: α = 2/(2 + 2·1) = 1/2, β = 1/4, k = (1/2)(1/2)/4 = 1/16
        let p = ZkbParams::new(1.5, 2, 1.0).unwrap();
        assert_relative_eq!(p.alpha, 0.5, max_relative = 1e-15);
        assert_relative_eq!(p.beta, 0.25, max_relative = 1e-15);
        assert_relative_eq!(p.k, 1.0 / 16.0, max_relative = 1e-15);
        let p = ZkbParams::new(2.0 - 1e-9, 2, 1.0).unwrap();
        assert_relative_eq!(p.alpha, 1.0, max_relative = 1e-6);
        assert!(p.k < 1e-8);
        assert!(matches!(ZkbParams::new(2.5, 1, 1.0), Err(Error::OutOfRegime { .. })));
    }

    #[test]
    fn zkb_eval_examples() {
        let ev = euclid1();
        let p = ZkbParams::new(1.5, 1, 1.0 / 12.0).unwrap();
        assert_relative_eq!(p.eval(&ev, [0.0, 0.0], 1.0).unwrap(), 1.0 / 144.0, max_relative = 1e-14);
        let edge = 2f64.powf(1.0 / 3.0);
        assert_eq!(p.eval(&ev, [edge, 0.0], 2.0).unwrap(), 0.0);
        assert_eq!(p.eval(&ev, [1.5, 0.0], 1.0).unwrap(), 0.0);
        assert_eq!(p.eval(&ev, [0.0, 0.0], 0.0), Err(Error::NonpositiveTime(0.0)));
    }

    #[test]
    fn zkb_support_radius_examples() {
        let p = ZkbParams::new(1.5, 1, 1.0 / 12.0).unwrap();
        assert_relative_eq!(p.support_radius(1.0).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(p.support_radius(8.0).unwrap(), 2.0, max_relative = 1e-14);
        assert!(p.support_radius(1e-30).unwrap() < 1e-9);
    }

    #[test]
    fn zkb_self_similarity() {
        let ev = FinslerEvaluator::new(NormSpec::parse("pnorm:3", 2).unwrap()).unwrap();
        let p = ZkbParams::new(1.4, 2, 0.7).unwrap();
        for &(lam, x, t) in &[(2.0f64, [0.3, 0.1], 1.0), (0.37, [-0.2, 0.5], 3.0), (5.0, [0.0, 0.9], 0.5)] {
            let scaled = [x[0] * lam.powf(p.beta), x[1] * lam.powf(p.beta)];
            let lhs = p.eval(&ev, scaled, lam * t).unwrap();
            let rhs = lam.powf(-p.alpha / (p.q - 1.0)) * p.eval(&ev, x, t).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        }
    }

    #[test]
    fn zkb_mass_is_time_independent() {
        let ev = euclid1();
        let p = ZkbParams::new(1.5, 1, 1.0 / 12.0).unwrap();
        let m1 = p.mass(&ev, 1.0, 1e-3).unwrap();
        let m8 = p.mass(&ev, 8.0, 1e-3).unwrap();
        assert!(m1 > 0.0);
        assert!((m1 - m8).abs() / m1 <= 5e-3);
        // v = t^{-1/3}(C - k x^2 t^{-2/3})_+ integrates to (4/3) C^{3/2} k^{-1/2}
        let exact = 4.0 / 3.0 * (1.0f64 / 12.0).powf(1.5) * 12f64.sqrt();
        assert_relative_eq!(m1, exact, max_relative = 1e-5);
        // doubling C scales the mass by 2^{3/2} at any time
        let p2 = ZkbParams::new(1.5, 1, 2.0 / 12.0).unwrap();
        for t in [1.0, 3.0] {
            let r = p2.mass(&ev, t, 1e-3).unwrap() / p.mass(&ev, t, 1e-3).unwrap();
            assert_relative_eq!(r, 2f64.powf(1.5), max_relative = 1e-3);
        }
    }

    #[test]
    fn majorant_phi_examples() {
        let mp = MajorantParams { a0: 2.0, c1: 0.0, d: 1.0, kappa: 3.0, dim: 1 };
        assert_eq!(majorant_phi(&mp, 10.0), MajorantValue::Finite(2.0));
        let mp = MajorantParams::new(1.0, 1.0, 1.5, 1).unwrap();
        assert_eq!((mp.d, mp.kappa), (1.0, 3.0));
        assert_relative_eq!(mp.blowup_time().unwrap(), (2.0f64 / 3.0).powf(1.5), max_relative = 1e-14);
        // 1/(1 - 1.5 * 0.2^{2/3})
        let v = majorant_phi(&mp, 0.2).finite().unwrap();
        assert_relative_eq!(v, 1.0 / (1.0 - 1.5 * 0.2f64.powf(2.0 / 3.0)), max_relative = 1e-14);
        assert_relative_eq!(v, 2.0533, max_relative = 1e-4);
        assert_eq!(majorant_phi(&mp, 0.6), MajorantValue::BlownUp);
        let mut prev = 0.0;
        for i in 0..50 {
            let v = majorant_phi(&mp, 0.54 * i as f64 / 50.0).finite().unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn majorant_psi_examples() {
        assert_eq!(majorant_psi(3.0, 0.0, 1.0, 3.0, 5.0), MajorantValue::Finite(3.0));
        let tb = majorant_psi_blowup_time(1.0, 1.0, 1.0, 3.0).unwrap();
        assert_relative_eq!(tb, 1.0);
        assert!(majorant_psi(1.0, 1.0, 1.0, 3.0, 0.999).finite().is_some());
        assert_eq!(majorant_psi(1.0, 1.0, 1.0, 3.0, 1.001), MajorantValue::BlownUp);
        let tb2 = majorant_psi_blowup_time(2.0, 1.0, 1.0, 3.0).unwrap();
        assert_relative_eq!(tb / tb2, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn majorants_solve_their_odes() {
        let mp = MajorantParams::new(0.8, 1.3, 1.5, 1).unwrap();
        let tb = mp.blowup_time().unwrap();
        for frac in [0.2, 0.5, 0.8] {
            let t = frac * tb;
            let mut errs = Vec::new();
            for h in [1e-4, 5e-5] {
                let fwd = majorant_phi(&mp, t + h).finite().unwrap();
                let v = majorant_phi(&mp, t).finite().unwrap();
                let fd = (fwd - v) / h;
                let rhs = mp.c1 * t.powf(-mp.time_exponent()) * v.powf(mp.power());
                errs.push((fd - rhs).abs() / rhs);
            }
            assert!(errs[0] < 1e-2 && errs[1] < errs[0] * 0.6, "{errs:?}");
        }
        let (a0, c5, d, kap) = (0.9, 0.7, 1.0, 3.0);
        let tb = majorant_psi_blowup_time(a0, c5, d, kap).unwrap();
        for frac in [0.2, 0.5, 0.8] {
            let t = frac * tb;
            let h = 1e-6;
            let v = majorant_psi(a0, c5, d, kap, t).finite().unwrap();
            let fd = (majorant_psi(a0, c5, d, kap, t + h).finite().unwrap() - v) / h;
            let rhs = c5 * t.powf(1.0 / kap - 1.0) * v.powf(1.0 + d / kap);
            assert_relative_eq!(fd, rhs, max_relative = 1e-3);
        }
    }

    #[test]
    fn ode_compare_examples() {
        let r = ode_compare(|x| x, |_| 1.0, 1.0, 2.0, 1.0, 1e-3).unwrap();
        assert!(r.holds);
        // f(x) = x^2, k = τ^{-1/2}; the upper solution 1/(1-2√t) blows up at t = 1/4
        let r = ode_compare(|x| x * x, |t: f64| t.powf(-0.5), 0.5, 1.0, 0.2, 1e-5).unwrap();
        assert!(r.holds);
        assert!(ode_compare(|x| x, |_| 1.0, 1.0, 1.0, 1.0, 1e-3).is_err());
        assert!(matches!(
            ode_compare(|x| x * x, |_| 1.0, 1.0, 2.0, 5.0, 0.1),
            Err(Error::StepTooLarge(_))
        ));
    }
}
