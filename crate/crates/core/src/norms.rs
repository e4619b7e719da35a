//! Finsler norms `H`, their duals `H_0`, gradients and the diffusion flux
//! `a(ξ) = H(ξ)∇H(ξ)`.
//!
//! Vectors are `[f64; 2]`; in one dimension the second component is kept at
//! zero and ignored.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
fn euclid(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    Euclidean,
    /// `(|ξ₁|^s + |ξ₂|^s)^{1/s}` with `1 < s < ∞`.
    PNorm(f64),
    /// `√(ξ·Aξ)` with `A = [[a11, a12], [a12, a22]]` positive definite.
    Anisotropic { a11: f64, a12: f64, a22: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec {
    pub kind: NormKind,
    pub dim: usize,
}

impl NormSpec {
    pub fn new(kind: NormKind, dim: usize) -> Self {
        Self { kind, dim }
    }

    pub fn euclidean(dim: usize) -> Self {
        Self::new(NormKind::Euclidean, dim)
    }

    /// Parses `euclidean`, `pnorm:<s>`, `aniso:<a11,a12,a22>` or
/// `aniso:[[a11,a12],[a12,a22]]`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let text = text.trim();
        let (head, tail) = match text.split_once(':') {
            Some((h, t)) => (h.trim(), Some(t.trim())),
            None => (text, None),
        };
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidNorm(format!("not a number: {s:?}")))
        };
        let kind = match (head, tail) {
            ("euclidean", None) => NormKind::Euclidean,
            ("pnorm", Some(s)) => NormKind::PNorm(num(s)?),
            ("aniso", Some(t)) => {
                let matrix = t.starts_with('[');
                let flat: String = t.chars().filter(|c| *c != '[' && *c != ']').collect();
                let parts = flat.split(',').map(num).collect::<Result<Vec<f64>>>()?;
                match (matrix, parts.as_slice()) {
                    (false, &[a11, a12, a22]) => NormKind::Anisotropic { a11, a12, a22 },
                    (true, &[a11, a12, a21, a22]) if a12 == a21 => NormKind::Anisotropic { a11, a12, a22 },
                    _ => {
                        return Err(Error::InvalidNorm(format!(
                            "aniso expects a11,a12,a22 or a symmetric [[a11,a12],[a12,a22]], got {t:?}"
                        )))
                    }
                }
            }
            _ => return Err(Error::InvalidNorm(format!("unrecognised norm {text:?}"))),
        };
        let spec = Self::new(kind, dim);
        FinslerEvaluator::new(spec)?;
        Ok(spec)
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            NormKind::Euclidean => write!(f, "euclidean"),
            NormKind::PNorm(s) => write!(f, "pnorm:{s}"),
            NormKind::Anisotropic { a11, a12, a22 } => write!(f, "aniso:{a11},{a12},{a22}"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Kernel {
    Euclidean,
    PNorm { s: f64, dual: f64 },
    Aniso { a: [f64; 3], inv: [f64; 3] },
}

/// Immutable evaluator for one norm; cheap to copy and share.
#[derive(Debug, Clone, Copy)]
pub struct FinslerEvaluator {
    spec: NormSpec,
    kernel: Kernel,
}

fn pnorm(x: Vec2, s: f64) -> f64 {
    let m = x[0].abs().max(x[1].abs());
    if m == 0.0 {
        return 0.0;
    }
    let a = (x[0].abs() / m).powf(s);
    let b = (x[1].abs() / m).powf(s);
    m * (a + b).powf(1.0 / s)
}

#[inline]
fn quad(m: [f64; 3], x: Vec2) -> f64 {
    m[0] * x[0] * x[0] + 2.0 * m[1] * x[0] * x[1] + m[2] * x[1] * x[1]
}

impl FinslerEvaluator {
    pub fn new(spec: NormSpec) -> Result<Self> {
        if spec.dim != 1 && spec.dim != 2 {
            return Err(Error::InvalidNorm(format!(
                "dimension must be 1 or 2, got {}",
                spec.dim
            )));
        }
        let kernel = match spec.kind {
            NormKind::Euclidean => Kernel::Euclidean,
            NormKind::PNorm(s) => {
                if !(s > 1.0 && s.is_finite()) {
                    return Err(Error::InvalidNorm(format!(
                        "pnorm exponent must lie in (1, inf) for a strictly convex unit ball, got {s}"
                    )));
                }
                Kernel::PNorm { s, dual: s / (s - 1.0) }
            }
            NormKind::Anisotropic { a11, a12, a22 } => {
                let (a12, a22) = if spec.dim == 1 { (0.0, 1.0) } else { (a12, a22) };
                let det = a11 * a22 - a12 * a12;
                if !(a11 > 0.0 && det > 0.0) || !a11.is_finite() || !a22.is_finite() {
                    return Err(Error::InvalidNorm(
                        "anisotropic matrix must be symmetric positive definite".into(),
                    ));
                }
                Kernel::Aniso {
                    a: [a11, a12, a22],
                    inv: [a22 / det, -a12 / det, a11 / det],
                }
            }
        };
        Ok(Self { spec, kernel })
    }

    pub fn spec(&self) -> NormSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// `H(ξ)`.
    pub fn eval(&self, xi: Vec2) -> f64 {
        match self.kernel {
            Kernel::Euclidean => euclid(xi),
            Kernel::PNorm { s, .. } => pnorm(xi, s),
            Kernel::Aniso { a, .. } => quad(a, xi).max(0.0).sqrt(),
        }
    }

    /// `H_0(x) = sup_{ξ≠0} x·ξ / H(ξ)`, by closed form.
    pub fn dual_eval(&self, x: Vec2) -> f64 {
        match self.kernel {
            Kernel::Euclidean => euclid(x),
            Kernel::PNorm { dual, .. } => pnorm(x, dual),
            Kernel::Aniso { inv, .. } => quad(inv, x).max(0.0).sqrt(),
        }
    }

    /// `∇_ξ H(ξ)`; undefined at the origin.
    pub fn grad(&self, xi: Vec2) -> Result<Vec2> {
        let h = self.eval(xi);
        if h == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(match self.kernel {
            Kernel::Euclidean => [xi[0] / h, xi[1] / h],
            Kernel::PNorm { s, .. } => {
                let g = |c: f64| (c.abs() / h).powf(s - 1.0).copysign(c);
                [g(xi[0]), g(xi[1])]
            }
            Kernel::Aniso { a, .. } => [
                (a[0] * xi[0] + a[1] * xi[1]) / h,
                (a[1] * xi[0] + a[2] * xi[1]) / h,
            ],
        })
    }

    /// `a(ξ) = H(ξ)∇H(ξ) = ∇(½H²)`, continuous with `a(0) = 0`.
    pub fn flux(&self, xi: Vec2) -> Vec2 {
        match self.kernel {
            Kernel::Euclidean => xi,
            Kernel::PNorm { s, .. } => {
                let h = pnorm(xi, s);
                if h == 0.0 {
                    return [0.0, 0.0];
                }
                // H^{2-s}|ξ_j|^{s-1} sign ξ_j, written so nothing blows up on the axes
                let f = |c: f64| h * (c.abs() / h).powf(s - 1.0).copysign(c);
                [f(xi[0]), f(xi[1])]
            }
            Kernel::Aniso { a, .. } => [a[0] * xi[0] + a[1] * xi[1], a[1] * xi[0] + a[2] * xi[1]],
        }
    }

    /// Symmetric Jacobian of the flux, i.e. the Hessian of `½H²`.
    ///
    /// The Hessian is 0-homogeneous; at the origin it is evaluated on the
    /// diagonal direction. For `pnorm` with `s < 2` the diagonal term is
    /// unbounded on the axes and is regularized with `eps`.
    pub fn flux_jacobian(&self, xi: Vec2, eps: f64) -> [[f64; 2]; 2] {
        match self.kernel {
            Kernel::Euclidean => [[1.0, 0.0], [0.0, 1.0]],
            Kernel::Aniso { a, .. } => [[a[0], a[1]], [a[1], a[2]]],
            Kernel::PNorm { s, .. } => {
                let mut x = xi;
                if pnorm(x, s) == 0.0 {
                    x = if self.spec.dim == 1 { [1.0, 0.0] } else { [1.0, 1.0] };
                }
                let h = pnorm(x, s);
                let r = [x[0].abs() / h, x[1].abs() / h];
                let sg = [x[0].signum(), x[1].signum()];
                let mut j = [[0.0; 2]; 2];
                for p in 0..2 {
                    for k in 0..2 {
                        j[p][k] = (2.0 - s)
                            * r[p].powf(s - 1.0)
                            * r[k].powf(s - 1.0)
                            * sg[p]
                            * sg[k];
                    }
                    let rr = if s < 2.0 { r[p] + eps } else { r[p] };
                    let diag = (s - 1.0) * rr.powf(s - 2.0);
                    j[p][p] += if diag.is_finite() { diag } else { 0.0 };
                }
                if self.spec.dim == 1 {
                    j[0][1] = 0.0;
                    j[1][0] = 0.0;
                    j[1][1] = 0.0;
                }
                j
            }
        }
    }

    /// Half-widths along each axis of the unit dual ball `{H_0 < 1}`.
    pub fn dual_extent(&self) -> Vec2 {
        let e = match self.kernel {
            Kernel::Euclidean | Kernel::PNorm { .. } => [1.0, 1.0],
            Kernel::Aniso { a, .. } => [a[0].sqrt(), a[2].sqrt()],
        };
        if self.spec.dim == 1 {
            [e[0], 0.0]
        } else {
            e
        }
    }

    pub fn in_ball(&self, x: Vec2, radius: f64) -> bool {
        self.dual_eval(x) < radius
    }

    /// Lebesgue measure of `B_R = {H_0 < R}`.
    pub fn ball_volume(&self, radius: f64) -> Result<f64> {
        if !(radius > 0.0) {
            return Err(Error::NonpositiveRadius(radius));
        }
        let unit = match (self.kernel, self.spec.dim) {
            (Kernel::Euclidean, 1) | (Kernel::PNorm { .. }, 1) => 2.0,
            (Kernel::Euclidean, _) => std::f64::consts::PI,
            (Kernel::Aniso { a, .. }, 1) => 2.0 * a[0].sqrt(),
            (Kernel::Aniso { a, .. }, _) => {
                std::f64::consts::PI * (a[0] * a[2] - a[1] * a[1]).sqrt()
            }
            (Kernel::PNorm { dual, .. }, _) => {
                // area of the unit ball of the conjugate-exponent norm
                let g1 = libm::tgamma(1.0 + 1.0 / dual);
                4.0 * g1 * g1 / libm::tgamma(1.0 + 2.0 / dual)
            }
        };
        Ok(unit * radius.powi(self.spec.dim as i32))
    }

    /// Dual norm by direct maximization of `x·ξ/H(ξ)` over unit directions.
    /// Test oracle for [`dual_eval`](Self::dual_eval); not used by solvers.
    pub fn dual_eval_by_sup(&self, x: Vec2) -> f64 {
        if self.spec.dim == 1 {
            return x[0].abs() / self.eval([1.0, 0.0]);
        }
        let f = |th: f64| {
            let e = [th.cos(), th.sin()];
            dot(x, e) / self.eval(e)
        };
        let n = 720;
        let step = std::f64::consts::TAU / n as f64;
        let (mut best, mut best_th) = (f64::NEG_INFINITY, 0.0);
        for i in 0..n {
            let th = i as f64 * step;
            let v = f(th);
            if v > best {
                best = v;
                best_th = th;
            }
        }
        let (mut lo, mut hi) = (best_th - step, best_th + step);
        let gr = 0.5 * (5.0_f64.sqrt() - 1.0);
        let mut c = hi - gr * (hi - lo);
        let mut d = lo + gr * (hi - lo);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..200 {
            if fc > fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - gr * (hi - lo);
                fc = f(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + gr * (hi - lo);
                fd = f(d);
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        best.max(fc).max(fd)
    }

    /// Samples random pairs and measures the worst violation of the norm
    /// identities: Euler's relation, `H_0(∇H) = 1`, the duality inequality,
    /// `H_0(a(ξ)) = H(ξ)` and monotonicity of the flux.
    pub fn verify_identities(&self, n_samples: usize, seed: u64) -> IdentityReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = self.spec.dim;
        let draw = |rng: &mut ChaCha8Rng| -> Vec2 {
            let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
            let a = rng.gen_range(-1.0..1.0) * scale;
            let b = if dim == 2 { rng.gen_range(-1.0..1.0) * scale } else { 0.0 };
            [a, b]
        };
        let mut rep = IdentityReport {
            samples: n_samples,
            ..IdentityReport::default()
        };
        for _ in 0..n_samples {
            let xi = draw(&mut rng);
            let eta = draw(&mut rng);
            let x = draw(&mut rng);
            let h = self.eval(xi);
            if h == 0.0 {
                continue;
            }
            let g = self.grad(xi).expect("nonzero sample");
            rep.max_euler_residual = rep.max_euler_residual.max((dot(xi, g) - h).abs() / h);
            rep.max_dual_grad_residual =
                rep.max_dual_grad_residual.max((self.dual_eval(g) - 1.0).abs());
            let bound = self.dual_eval(x) * h;
            rep.max_duality_excess = rep.max_duality_excess.max((dot(x, xi) - bound) / bound);
            let a = self.flux(xi);
            rep.max_flux_dual_residual =
                rep.max_flux_dual_residual.max((self.dual_eval(a) - h).abs() / h);
            let b = self.flux(eta);
            let diff = [xi[0] - eta[0], xi[1] - eta[1]];
            let scale = (euclid(xi) + euclid(eta)).powi(2);
            let mono = dot([a[0] - b[0], a[1] - b[1]], diff) / scale;
            rep.min_monotonicity = rep.min_monotonicity.min(mono);
        }
        rep
    }
}

/// Worst residuals found by [`FinslerEvaluator::verify_identities`]. All
/// residuals are relative; monotonicity is normalized by `(|ξ|+|η|)²`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdentityReport {
    pub samples: usize,
    pub max_euler_residual: f64,
    pub max_dual_grad_residual: f64,
    /// `max (x·ξ − H_0(x)H(ξ)) / (H_0(x)H(ξ))`; nonpositive up to rounding.
    pub max_duality_excess: f64,
    pub max_flux_dual_residual: f64,
    pub min_monotonicity: f64,
}

impl IdentityReport {
    /// Residuals at most `tol` and monotonicity at least `-mono_tol`.
    pub fn passes(&self, tol: f64, mono_tol: f64) -> bool {
        self.max_euler_residual <= tol
            && self.max_dual_grad_residual <= tol
            && self.max_duality_excess <= tol
            && self.max_flux_dual_residual <= tol
            && self.min_monotonicity >= -mono_tol
    }
}
