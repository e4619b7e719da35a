//! Sparse storage for the Newton systems and the two linear solvers used on
//! them: a tridiagonal sweep in 1D and Jacobi-preconditioned conjugate
//! gradients in 2D. The systems are symmetric positive definite.

use crate::disc::Grid;
use crate::error::{Error, Result};
use crate::exec;

/// Per-node stencil storage on the full box, keyed by lattice offset.
#[derive(Debug, Clone)]
pub struct StencilMatrix {
    dim: usize,
    n: usize,
    offsets: Vec<(isize, isize)>,
    slot: [i8; 25],
    coeffs: Vec<f64>,
}

impl StencilMatrix {
    pub fn new(grid: &Grid) -> Self {
        let dim = grid.dim();
        let mut offsets = Vec::new();
        let mut slot = [-1i8; 25];
        if dim == 1 {
            for di in -1..=1 {
                slot[((di + 2) * 5 + 2) as usize] = offsets.len() as i8;
                offsets.push((di, 0));
            }
        } else {
            for dj in -2isize..=2 {
                for di in -2isize..=2 {
                    if di.abs() == 2 && dj.abs() == 2 {
                        continue;
                    }
                    slot[((di + 2) * 5 + dj + 2) as usize] = offsets.len() as i8;
                    offsets.push((di, dj));
                }
            }
        }
        let coeffs = vec![0.0; grid.n_nodes() * offsets.len()];
        Self { dim, n: grid.n_side(), offsets, slot, coeffs }
    }

    fn ij(&self, p: usize) -> (isize, isize) {
        if self.dim == 1 {
            (p as isize, 0)
        } else {
            ((p % self.n) as isize, (p / self.n) as isize)
        }
    }

    fn slot_of(&self, p: usize, q: usize) -> usize {
        let (pi, pj) = self.ij(p);
        let (qi, qj) = self.ij(q);
        let (di, dj) = (qi - pi, qj - pj);
        assert!(di.abs() <= 2 && dj.abs() <= 2, "entry outside stencil");
        let s = self.slot[((di + 2) * 5 + dj + 2) as usize];
        assert!(s >= 0, "entry outside stencil");
        s as usize
    }

    pub fn add(&mut self, p: usize, q: usize, v: f64) {
        let s = self.slot_of(p, q);
        self.coeffs[p * self.offsets.len() + s] += v;
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.coeffs[p * self.offsets.len() + self.slot_of(p, q)]
    }

    fn neighbour(&self, p: usize, k: usize) -> Option<usize> {
        let (i, j) = self.ij(p);
        let (di, dj) = self.offsets[k];
        let (a, b) = (i + di, j + dj);
        let n = self.n as isize;
        if a < 0 || a >= n || b < 0 || (self.dim == 2 && b >= n) {
            return None;
        }
        Some(if self.dim == 1 { a as usize } else { (b * n + a) as usize })
    }

    /// `y = A x` on the full box.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let m = self.offsets.len();
        exec::fill(y, |p| {
            let row = &self.coeffs[p * m..(p + 1) * m];
            let mut s = 0.0;
            for (k, &c) in row.iter().enumerate() {
                if c != 0.0 {
                    if let Some(q) = self.neighbour(p, k) {
                        s += c * x[q];
                    }
                }
            }
            s
        });
    }

    /// Restriction to the grid's interior nodes in compressed-row form.
    pub fn to_csr(&self, grid: &Grid) -> CsrMatrix {
        let interior = grid.interior();
        let mut compact = vec![usize::MAX; grid.n_nodes()];
        for (k, &p) in interior.iter().enumerate() {
            compact[p] = k;
        }
        let m = self.offsets.len();
        let mut row_ptr = Vec::with_capacity(interior.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = Vec::with_capacity(interior.len());
        row_ptr.push(0);
        for &p in interior {
            let mut d = 0.0;
            for k in 0..m {
                let c = self.coeffs[p * m + k];
                if c == 0.0 {
                    continue;
                }
                if let Some(q) = self.neighbour(p, k) {
                    let cq = compact[q];
                    if cq != usize::MAX {
                        if q == p {
                            d = c;
                        }
                        cols.push(cq);
                        vals.push(c);
                    }
                }
            }
            diag.push(d);
            row_ptr.push(cols.len());
        }
        CsrMatrix { row_ptr, cols, vals, diag }
    }
}

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl CsrMatrix {
    pub fn nrows(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        exec::fill(y, |r| {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            s
        });
    }

    /// Tridiagonal sweep; valid when every row couples only to its
    /// immediate predecessor and successor (the 1D case).
    pub fn solve_tridiagonal(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.nrows();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for r in 0..n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                if c + 1 == r {
                    lower[r] = self.vals[k];
                } else if c == r + 1 {
                    upper[r] = self.vals[k];
                } else if c != r {
                    return Err(Error::InvalidArgument("matrix is not tridiagonal".into()));
                }
            }
        }
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        for r in 0..n {
            let denom = self.diag[r] - if r > 0 { lower[r] * cp[r - 1] } else { 0.0 };
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::InvalidArgument("singular tridiagonal system".into()));
            }
            cp[r] = upper[r] / denom;
            dp[r] = (rhs[r] - if r > 0 { lower[r] * dp[r - 1] } else { 0.0 }) / denom;
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            x[r] = dp[r] - if r + 1 < n { cp[r] * x[r + 1] } else { 0.0 };
        }
        Ok(x)
    }

    /// Jacobi-preconditioned conjugate gradients from a zero start.
    /// Stops when `‖r‖₂ ≤ rel_tol ‖b‖₂`.
    pub fn solve_pcg(&self, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
        let n = self.nrows();
        let dot = |a: &[f64], c: &[f64]| exec::sum(n, |i| a[i] * c[i]);
        let inv: Vec<f64> = self.diag.iter().map(|d| 1.0 / d).collect();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let bnorm = dot(b, b).sqrt();
        if bnorm == 0.0 {
            return Ok((x, 0));
        }
        let mut z = vec![0.0; n];
        exec::fill(&mut z, |i| r[i] * inv[i]);
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dot(&r, &z);
        for it in 1..=max_iter {
            self.matvec(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::InvalidArgument("matrix is not positive definite".into()));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if dot(&r, &r).sqrt() <= rel_tol * bnorm {
                return Ok((x, it));
            }
            exec::fill(&mut z, |i| r[i] * inv[i]);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        let res = dot(&r, &r).sqrt() / bnorm;
        Err(Error::NonConvergence { iterations: max_iter, residual: res })
    }
}
