//! Small linear-algebra kernels: a pentadiagonal LDLᵀ solver and an
//! incremental Givens least-squares accumulator.

use crate::error::{Error, Result};

/// Symmetric positive-definite matrix with bandwidth 2, stored by diagonals.
#[derive(Clone, Debug)]
pub struct PentaSpd {
    diag: Vec<f64>,
    off1: Vec<f64>,
    off2: Vec<f64>,
}

impl PentaSpd {
    /// `off1[i] = A[i][i+1]`, `off2[i] = A[i][i+2]`; missing trailing entries are zero.
    pub fn new(diag: Vec<f64>, mut off1: Vec<f64>, mut off2: Vec<f64>) -> Self {
        let n = diag.len();
        off1.resize(n, 0.0);
        off2.resize(n, 0.0);
        Self { diag, off1, off2 }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i + 1 < n {
                acc += self.off1[i] * x[i + 1];
            }
            if i + 2 < n {
                acc += self.off2[i] * x[i + 2];
            }
            if i >= 1 {
                acc += self.off1[i - 1] * x[i - 1];
            }
            if i >= 2 {
                acc += self.off2[i - 2] * x[i - 2];
            }
            out[i] = acc;
        }
        out
    }

    pub fn factor(&self) -> Result<PentaLdl> {
        let n = self.len();
        let mut d = vec![0.0; n];
        let mut l1 = vec![0.0; n];
        let mut l2 = vec![0.0; n];
        for i in 0..n {
            let mut di = self.diag[i];
            if i >= 1 {
                di -= l1[i - 1] * l1[i - 1] * d[i - 1];
            }
            if i >= 2 {
                di -= l2[i - 2] * l2[i - 2] * d[i - 2];
            }
            if di <= 0.0 || !di.is_finite() {
                return Err(Error::Invariant(format!(
                    "banded matrix not positive definite at pivot {i}"
                )));
            }
            d[i] = di;
            if i + 1 < n {
                let mut a = self.off1[i];
                if i >= 1 {
                    a -= l2[i - 1] * d[i - 1] * l1[i - 1];
                }
                l1[i] = a / di;
            }
            if i + 2 < n {
                l2[i] = self.off2[i] / di;
            }
        }
        Ok(PentaLdl { d, l1, l2 })
    }
}

#[derive(Clone, Debug)]
pub struct PentaLdl {
    d: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
}

impl PentaLdl {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        debug_assert_eq!(b.len(), n);
        for i in 0..n {
            let mut v = b[i];
            if i >= 1 {
                v -= self.l1[i - 1] * b[i - 1];
            }
            if i >= 2 {
                v -= self.l2[i - 2] * b[i - 2];
            }
            b[i] = v;
        }
        for i in 0..n {
            b[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            if i + 1 < n {
                v -= self.l1[i] * b[i + 1];
            }
            if i + 2 < n {
                v -= self.l2[i] * b[i + 2];
            }
            b[i] = v;
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Least squares `min ‖Aθ − y‖²` accumulated one row at a time with Givens
/// rotations; only the triangular factor and `Qᵀy` are stored.
#[derive(Clone, Debug)]
pub struct GivensLs {
    p: usize,
    r: Vec<f64>,
    qty: Vec<f64>,
    rss: f64,
    row: Vec<f64>,
}

impl GivensLs {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            r: vec![0.0; p * p],
            qty: vec![0.0; p],
            rss: 0.0,
            row: vec![0.0; p],
        }
    }

    pub fn reset(&mut self, p: usize) {
        self.p = p;
        self.r.clear();
        self.r.resize(p * p, 0.0);
        self.qty.clear();
        self.qty.resize(p, 0.0);
        self.row.clear();
        self.row.resize(p, 0.0);
        self.rss = 0.0;
    }

    /// Adds the row whose nonzeros are `values`, starting at column `first`.
    pub fn add_row(&mut self, first: usize, values: &[f64], y: f64) {
        let p = self.p;
        self.row.iter_mut().for_each(|v| *v = 0.0);
        self.row[first..first + values.len()].copy_from_slice(values);
        let mut y = y;
        for col in first..p {
            let a = self.row[col];
            if a == 0.0 {
                continue;
            }
            let base = col * p;
            let rjj = self.r[base + col];
            if rjj == 0.0 {
                self.r[base + col..base + p].copy_from_slice(&self.row[col..p]);
                self.qty[col] = y;
                return;
            }
            let rho = rjj.hypot(a);
            let (c, s) = (rjj / rho, a / rho);
            for j in col..p {
                let rv = self.r[base + j];
                let wv = self.row[j];
                self.r[base + j] = c * rv + s * wv;
                self.row[j] = -s * rv + c * wv;
            }
            let q = self.qty[col];
            self.qty[col] = c * q + s * y;
            y = -s * q + c * y;
        }
        self.rss += y * y;
    }

    /// Residual sum of squares of the least-squares solution.
    pub fn rss(&self) -> f64 {
        self.rss
    }

    /// Back-substitutes for θ; a (numerically) zero pivot means the design
    /// does not determine that coefficient.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let p = self.p;
        let scale = (0..p).map(|j| self.r[j * p + j].abs()).fold(0.0, f64::max);
        let mut theta = vec![0.0; p];
        for j in (0..p).rev() {
            let rjj = self.r[j * p + j];
            if rjj.abs() <= 1e-12 * scale || rjj == 0.0 {
                return Err(Error::EmptySegment { column: j });
            }
            let mut v = self.qty[j];
            for k in j + 1..p {
                v -= self.r[j * p + k] * theta[k];
            }
            theta[j] = v / rjj;
        }
        Ok(theta)
    }

    /// Whether every pivot is usable, without solving.
    pub fn full_rank(&self) -> bool {
        let p = self.p;
        let scale = (0..p).map(|j| self.r[j * p + j].abs()).fold(0.0, f64::max);
        (0..p).all(|j| {
            let v = self.r[j * p + j].abs();
            v != 0.0 && v > 1e-12 * scale
        })
    }
}
