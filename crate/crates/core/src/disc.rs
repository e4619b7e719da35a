//! Cartesian grids masked to dual-norm balls and the discrete Finsler
//! Laplacian.
//!
//! The discrete operator is defined as the negative gradient of the convex
//! energy `E(u) = Σ_faces ½ H(g_f)² w` where `g_f` is the face gradient and
//! `w = h^N / N` the diamond-cell volume of a face. Normal components of
//! `g_f` are two-point differences; in 2D the tangential component averages
//! the four adjacent nodal differences. With `L = −∇E / h^N` exactly, the
//! operator is monotone and satisfies summation by parts by construction.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::StencilMatrix;
use crate::norms::{FinslerEvaluator, Vec2};

pub type Field = Vec<f64>;

#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    h: f64,
    l: f64,
    n: usize,
    radius: f64,
    mask: Vec<bool>,
    interior: Vec<usize>,
}

impl Grid {
    /// Nodes `x = −L + i h` on `[−L, L]^N`, masked to `B_R = {H_0 < R}`.
    pub fn build(radius: f64, h: f64, l: f64, ev: &FinslerEvaluator) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::NonpositiveRadius(radius));
        }
        if !(h > 0.0) {
            return Err(Error::NonpositiveSpacing(h));
        }
        let ext = ev.dual_extent();
        let extent = radius * ext[0].max(ext[1]);
        if l < extent + 2.0 * h - 1e-12 * l.abs() {
            return Err(Error::BadPadding { l, extent });
        }
        let cells = 2.0 * l / h;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::SpacingMismatch { width: 2.0 * l, h });
        }
        let n = cells.round() as usize + 1;
        let dim = ev.dim();
        let total = if dim == 1 { n } else { n * n };
        let mut mask = vec![false; total];
        let mut interior = Vec::new();
        for (p, m) in mask.iter_mut().enumerate() {
            let x = coords(dim, n, h, l, p);
            if ev.in_ball(x, radius) {
                *m = true;
                interior.push(p);
            }
        }
        if interior.is_empty() {
            return Err(Error::InvalidArgument("ball contains no grid nodes".into()));
        }
        Ok(Self { dim, h, l, n, radius, mask, interior })
    }

    /// Builds a grid whose box half-width is the smallest multiple of `h`
    /// leaving at least `pad_cells` empty cells around the ball.
    pub fn with_padding(radius: f64, h: f64, pad_cells: usize, ev: &FinslerEvaluator) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::NonpositiveSpacing(h));
        }
        let ext = ev.dual_extent();
        let extent = radius * ext[0].max(ext[1]);
        let cells = (extent / h - 1e-9).ceil() as usize + pad_cells.max(2);
        Self::build(radius, h, cells as f64 * h, ev)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn half_width(&self) -> f64 {
        self.l
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    /// Nodes per axis.
    pub fn n_side(&self) -> usize {
        self.n
    }
    pub fn n_nodes(&self) -> usize {
        self.mask.len()
    }
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }
    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }
    pub fn is_interior(&self, p: usize) -> bool {
        self.mask[p]
    }
    pub fn node_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }
    /// Volume of the diamond cell attached to one face.
    pub fn face_weight(&self) -> f64 {
        self.node_volume() / self.dim as f64
    }

    pub fn coords(&self, p: usize) -> Vec2 {
        coords(self.dim, self.n, self.h, self.l, p)
    }

    /// Lattice index `(i, j)` of node `p`; `j = 0` in 1D.
    pub fn ij(&self, p: usize) -> (usize, usize) {
        if self.dim == 1 {
            (p, 0)
        } else {
            (p % self.n, p / self.n)
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        if self.dim == 1 {
            i
        } else {
            j * self.n + i
        }
    }

    /// Node index of the lattice point nearest to `x`, if it lies in the box.
    pub fn locate(&self, x: Vec2) -> Option<usize> {
        let idx = |c: f64| {
            let k = ((c + self.l) / self.h).round();
            (k >= 0.0 && (k as usize) < self.n).then_some(k as usize)
        };
        let i = idx(x[0])?;
        let j = if self.dim == 2 { idx(x[1])? } else { 0 };
        Some(self.index(i, j))
    }

    pub fn zeros(&self) -> Field {
        vec![0.0; self.n_nodes()]
    }

    /// Samples `f` on interior nodes; zero elsewhere.
    pub fn sample<F: Fn(Vec2) -> f64 + Sync + Send>(&self, f: F) -> Field {
        let mut out = self.zeros();
        exec::fill(&mut out, |p| if self.mask[p] { f(self.coords(p)) } else { 0.0 });
        out
    }

    pub fn check(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.n_nodes() {
            return Err(Error::ShapeMismatch { expected: self.n_nodes(), got: field.len() });
        }
        Ok(())
    }

    /// `Σ f · h^N` over all nodes.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        exec::sum(field.len(), |p| field[p]) * self.node_volume()
    }

    #[inline]
    fn at(&self, u: &[f64], i: isize, j: isize) -> f64 {
        let n = self.n as isize;
        if i < 0 || i >= n || j < 0 || (self.dim == 2 && j >= n) {
            return 0.0;
        }
        u[self.index(i as usize, j as usize)]
    }

    /// Face gradient on the face between node `p` and its `+axis` neighbour.
    #[inline]
    fn face_grad(&self, u: &[f64], p: usize, axis: usize) -> Vec2 {
        let (i, j) = self.ij(p);
        let (i, j) = (i as isize, j as isize);
        let h = self.h;
        if self.dim == 1 {
            return [(self.at(u, i + 1, 0) - self.at(u, i, 0)) / h, 0.0];
        }
        if axis == 0 {
            let gn = (self.at(u, i + 1, j) - self.at(u, i, j)) / h;
            let gt = (self.at(u, i, j + 1) - self.at(u, i, j - 1) + self.at(u, i + 1, j + 1)
                - self.at(u, i + 1, j - 1))
                / (4.0 * h);
            [gn, gt]
        } else {
            let gn = (self.at(u, i, j + 1) - self.at(u, i, j)) / h;
            let gt = (self.at(u, i + 1, j) - self.at(u, i - 1, j) + self.at(u, i + 1, j + 1)
                - self.at(u, i - 1, j + 1))
                / (4.0 * h);
            [gt, gn]
        }
    }

    fn face_exists(&self, p: usize, axis: usize) -> bool {
        let (i, j) = self.ij(p);
        if axis == 0 {
            i + 1 < self.n
        } else {
            j + 1 < self.n
        }
    }

    /// Midpoint of the face between `p` and its `+axis` neighbour.
    pub fn face_midpoint(&self, p: usize, axis: usize) -> Vec2 {
        let mut x = self.coords(p);
        x[axis] += 0.5 * self.h;
        x
    }

    /// Nodes of the box with `H_0(x) < r`.
    pub fn nodes_within(&self, ev: &FinslerEvaluator, r: f64) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&p| ev.in_ball(self.coords(p), r)).collect()
    }

    /// Writes `x[,y],value` rows over the whole box in index order.
    pub fn write_csv<W: Write>(&self, field: &[f64], mut out: W) -> io::Result<()> {
        if self.dim == 1 {
            writeln!(out, "x,value")?;
        } else {
            writeln!(out, "x,y,value")?;
        }
        for (p, v) in field.iter().enumerate() {
            let x = self.coords(p);
            if self.dim == 1 {
                writeln!(out, "{},{}", crate::io::fmt17(x[0]), crate::io::fmt17(*v))?;
            } else {
                writeln!(
                    out,
                    "{},{},{}",
                    crate::io::fmt17(x[0]),
                    crate::io::fmt17(x[1]),
                    crate::io::fmt17(*v)
                )?;
            }
        }
        Ok(())
    }
}

fn coords(dim: usize, n: usize, h: f64, l: f64, p: usize) -> Vec2 {
    if dim == 1 {
        [-l + p as f64 * h, 0.0]
    } else {
        [-l + (p % n) as f64 * h, -l + (p / n) as f64 * h]
    }
}

/// Reconstructed gradients, indexed by the lower node of each face.
/// Faces whose upper node would leave the box hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceGradient {
    /// Faces normal to the first axis.
    pub x: Vec<Vec2>,
    /// Faces normal to the second axis (empty in 1D).
    pub y: Vec<Vec2>,
}

pub fn face_gradients(grid: &Grid, field: &[f64]) -> Result<FaceGradient> {
    grid.check(field)?;
    let n = grid.n_nodes();
    let mut x = vec![[0.0; 2]; n];
    exec::fill(&mut x, |p| {
        if grid.face_exists(p, 0) {
            grid.face_grad(field, p, 0)
        } else {
            [0.0; 2]
        }
    });
    let mut y = Vec::new();
    if grid.dim == 2 {
        y = vec![[0.0; 2]; n];
        exec::fill(&mut y, |p| {
            if grid.face_exists(p, 1) {
                grid.face_grad(field, p, 1)
            } else {
                [0.0; 2]
            }
        });
    }
    Ok(FaceGradient { x, y })
}

fn face_fluxes(ev: &FinslerEvaluator, g: &FaceGradient) -> FaceGradient {
    let mut x = vec![[0.0; 2]; g.x.len()];
    exec::fill(&mut x, |p| ev.flux(g.x[p]));
    let mut y = vec![[0.0; 2]; g.y.len()];
    exec::fill(&mut y, |p| ev.flux(g.y[p]));
    FaceGradient { x, y }
}

/// `Σ_faces ½ H(g_f)² w`.
pub fn discrete_energy(grid: &Grid, ev: &FinslerEvaluator, field: &[f64]) -> Result<f64> {
    let g = face_gradients(grid, field)?;
    let w = grid.face_weight();
    let e = |v: &Vec<Vec2>| exec::sum(v.len(), |p| 0.5 * ev.eval(v[p]).powi(2));
    Ok((e(&g.x) + e(&g.y)) * w)
}

/// `Σ_faces H(g_f) w`, the discrete `‖H(∇u)‖_{L¹}`.
pub fn gradient_l1(grid: &Grid, ev: &FinslerEvaluator, field: &[f64]) -> Result<f64> {
    let g = face_gradients(grid, field)?;
    let e = |v: &Vec<Vec2>| exec::sum(v.len(), |p| ev.eval(v[p]));
    Ok((e(&g.x) + e(&g.y)) * grid.face_weight())
}

/// Discrete `Δ_H u = −∇E(u) / h^N` on interior nodes, zero elsewhere.
pub fn finsler_laplacian(grid: &Grid, ev: &FinslerEvaluator, field: &[f64]) -> Result<Field> {
    let g = face_gradients(grid, field)?;
    Ok(laplacian_from_fluxes(grid, &face_fluxes(ev, &g)))
}

pub(crate) fn laplacian_from_fluxes(grid: &Grid, a: &FaceGradient) -> Field {
    let h = grid.h;
    let scale = grid.face_weight() / grid.node_volume();
    let mut out = grid.zeros();
    if grid.dim == 1 {
        exec::fill(&mut out, |p| {
            if !grid.mask[p] || p == 0 {
                return 0.0;
            }
            scale * (a.x[p][0] - a.x[p - 1][0]) / h
        });
        return out;
    }
    let n = grid.n as isize;
    let fx = |i: isize, j: isize| -> Vec2 {
        if i < 0 || j < 0 || i >= n || j >= n {
            [0.0; 2]
        } else {
            a.x[(j * n + i) as usize]
        }
    };
    let fy = |i: isize, j: isize| -> Vec2 {
        if i < 0 || j < 0 || i >= n || j >= n {
            [0.0; 2]
        } else {
            a.y[(j * n + i) as usize]
        }
    };
    exec::fill(&mut out, |p| {
        if !grid.mask[p] {
            return 0.0;
        }
        let (i, j) = grid.ij(p);
        let (i, j) = (i as isize, j as isize);
        let dex = (fx(i - 1, j)[0] - fx(i, j)[0]) / h
            + (fx(i, j - 1)[1] + fx(i - 1, j - 1)[1] - fx(i, j + 1)[1] - fx(i - 1, j + 1)[1])
                / (4.0 * h);
        let dey = (fy(i, j - 1)[1] - fy(i, j)[1]) / h
            + (fy(i - 1, j)[0] + fy(i - 1, j - 1)[0] - fy(i + 1, j)[0] - fy(i + 1, j - 1)[0])
                / (4.0 * h);
        -scale * (dex + dey)
    });
    out
}

/// Nodes touched by the gradient of one face, with `∂g_f/∂u_node`.
fn face_stencil(grid: &Grid, axis: usize) -> ([(isize, isize, Vec2); 6], usize) {
    let h = grid.h;
    let t = 1.0 / (4.0 * h);
    if grid.dim == 1 {
        let mut out = [(0, 0, [0.0; 2]); 6];
        out[0] = (0, 0, [-1.0 / h, 0.0]);
        out[1] = (1, 0, [1.0 / h, 0.0]);
        return (out, 2);
    }
    let out = if axis == 0 {
        [
            (0, 0, [-1.0 / h, 0.0]),
            (1, 0, [1.0 / h, 0.0]),
            (0, 1, [0.0, t]),
            (1, 1, [0.0, t]),
            (0, -1, [0.0, -t]),
            (1, -1, [0.0, -t]),
        ]
    } else {
        [
            (0, 0, [0.0, -1.0 / h]),
            (0, 1, [0.0, 1.0 / h]),
            (1, 0, [t, 0.0]),
            (1, 1, [t, 0.0]),
            (-1, 0, [-t, 0.0]),
            (-1, 1, [-t, 0.0]),
        ]
    };
    (out, 6)
}

/// Hessian of the discrete energy restricted to interior nodes, scaled by
/// `scale`, with `diag` added on the diagonal. Rows of non-interior nodes
/// are identity. `eps` regularizes the flux Jacobian where it is unbounded.
pub(crate) fn assemble_jacobian(
    grid: &Grid,
    ev: &FinslerEvaluator,
    field: &[f64],
    diag: &[f64],
    scale: f64,
    eps: f64,
) -> StencilMatrix {
    let mut m = StencilMatrix::new(grid);
    let g = face_gradients(grid, field).expect("field checked by caller");
    let w = grid.face_weight() * scale;
    let n = grid.n as isize;
    let axes = if grid.dim == 1 { 1 } else { 2 };
    for axis in 0..axes {
        let grads = if axis == 0 { &g.x } else { &g.y };
        for (p, &gf) in grads.iter().enumerate() {
            if !grid.face_exists(p, axis) {
                continue;
            }
            let (stencil, len) = face_stencil(grid, axis);
            let (i0, j0) = grid.ij(p);
            let (i0, j0) = (i0 as isize, j0 as isize);
            // skip faces whose stencil has no interior node
            let mut nodes = [usize::MAX; 6];
            let mut any = false;
            for (k, &(di, dj, _)) in stencil[..len].iter().enumerate() {
                let (i, j) = (i0 + di, j0 + dj);
                if i < 0 || j < 0 || i >= n || (grid.dim == 2 && j >= n) {
                    continue;
                }
                let q = grid.index(i as usize, j as usize);
                if grid.mask[q] {
                    nodes[k] = q;
                    any = true;
                }
            }
            if !any {
                continue;
            }
            let jac = ev.flux_jacobian(gf, eps);
            for a in 0..len {
                if nodes[a] == usize::MAX {
                    continue;
                }
                let ca = stencil[a].2;
                let ja = [
                    jac[0][0] * ca[0] + jac[1][0] * ca[1],
                    jac[0][1] * ca[0] + jac[1][1] * ca[1],
                ];
                for b in 0..len {
                    if nodes[b] == usize::MAX {
                        continue;
                    }
                    let cb = stencil[b].2;
                    let v = w * (ja[0] * cb[0] + ja[1] * cb[1]);
                    if v != 0.0 {
                        m.add(nodes[a], nodes[b], v);
                    }
                }
            }
        }
    }
    for (p, &d) in diag.iter().enumerate() {
        m.add(p, p, if grid.mask[p] { d } else { 1.0 });
    }
    m
}

/// `β(u) = |u|^{q−2} u`.
#[inline]
pub fn beta(q: f64, u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.abs().powf(q - 1.0).copysign(u)
    }
}

/// Inverse of [`beta`], `|v|^{1/(q−1)} sign v`.
#[inline]
pub fn beta_inverse(q: f64, v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.abs().powf(1.0 / (q - 1.0)).copysign(v)
    }
}

pub fn beta_field(q: f64, u: &[f64]) -> Field {
    let mut out = vec![0.0; u.len()];
    exec::fill(&mut out, |p| beta(q, u[p]));
    out
}

pub fn beta_inverse_field(q: f64, v: &[f64]) -> Field {
    let mut out = vec![0.0; v.len()];
    exec::fill(&mut out, |p| beta_inverse(q, v[p]));
    out
}
