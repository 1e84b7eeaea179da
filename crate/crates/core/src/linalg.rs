//! Sparse symmetric systems: banded LDLᵀ factorization and damped Jacobi.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Square sparse matrix stored as a diagonal plus CSR off-diagonal entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseRows {
    pub diag: Vec<f64>,
    start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseRows {
    pub fn new() -> Self {
        Self { diag: Vec::new(), start: vec![0], cols: Vec::new(), vals: Vec::new() }
    }

    /// Appends a row: diagonal entry and `(column, value)` pairs.
    pub fn push_row(&mut self, diag: f64, offs: &[(usize, f64)]) {
        self.diag.push(diag);
        for &(c, v) in offs {
            self.cols.push(c);
            self.vals.push(v);
        }
        self.start.push(self.cols.len());
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.start[r], self.start[r + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    /// `y = A x`.
    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.len() {
            let mut s = self.diag[r] * x[r];
            for (c, v) in self.row(r) {
                s += v * x[c];
            }
            y[r] = s;
        }
    }

    pub fn residual_max(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut m = 0.0f64;
        for r in 0..self.len() {
            let mut s = self.diag[r] * x[r];
            for (c, v) in self.row(r) {
                s += v * x[c];
            }
            m = m.max((b[r] - s).abs());
        }
        m
    }

    pub fn bandwidth(&self) -> usize {
        let mut w = 0;
        for r in 0..self.len() {
            for (c, _) in self.row(r) {
                w = w.max(r.abs_diff(c));
            }
        }
        w
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for r in 0..self.len() {
            for (c, v) in self.row(r) {
                let back: f64 = self.row(c).filter(|&(k, _)| k == r).map(|(_, w)| w).sum();
                if (back - v).abs() > tol * (1.0 + v.abs()) {
                    return false;
                }
            }
        }
        true
    }
}

/// LDLᵀ factors of a symmetric positive definite banded matrix.
#[derive(Clone, Debug)]
pub struct BandedLdl {
    n: usize,
    w: usize,
    // Row r holds L[r][r-w..r] at band[r*w .. r*w + w]; slot k is column r-w+k.
    band: Vec<f64>,
    d: Vec<f64>,
}

impl BandedLdl {
    pub fn factor(a: &SparseRows) -> Result<Self> {
        let n = a.len();
        let w = a.bandwidth().max(1);
        let mut band = vec![0.0; n * w];
        for r in 0..n {
            for (c, v) in a.row(r) {
                if c < r {
                    band[r * w + (c + w - r)] += v;
                }
            }
        }
        let mut d = a.diag.clone();
        for r in 0..n {
            let lo = r.saturating_sub(w);
            for c in lo..r {
                // L[r][c] = (A[r][c] - Σ_k L[r][k] d[k] L[c][k]) / d[c]
                let klo = lo.max(c.saturating_sub(w));
                let mut s = band[r * w + (c + w - r)];
                for k in klo..c {
                    s -= band[r * w + (k + w - r)] * d[k] * band[c * w + (k + w - c)];
                }
                band[r * w + (c + w - r)] = s / d[c];
            }
            let mut dr = d[r];
            for k in lo..r {
                let l = band[r * w + (k + w - r)];
                dr -= l * l * d[k];
            }
            if !(dr > 0.0) || !dr.is_finite() {
                return Err(Error::NonConvergence { solver: "banded factorization", iterations: r, residual: dr });
            }
            d[r] = dr;
        }
        Ok(Self { n, w, band, d })
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, x: &mut [f64]) {
        let (n, w) = (self.n, self.w);
        for r in 0..n {
            let lo = r.saturating_sub(w);
            let mut s = x[r];
            for k in lo..r {
                s -= self.band[r * w + (k + w - r)] * x[k];
            }
            x[r] = s;
        }
        for r in 0..n {
            x[r] /= self.d[r];
        }
        for r in (0..n).rev() {
            let xr = x[r];
            let lo = r.saturating_sub(w);
            for k in lo..r {
                x[k] -= self.band[r * w + (k + w - r)] * xr;
            }
        }
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Damped Jacobi sweeps on `A x = b`, starting from the given `x`, until the
/// max-norm residual is at most `tol`.
pub fn jacobi(a: &SparseRows, b: &[f64], x: &mut [f64], omega: f64, tol: f64, max_iters: usize) -> Result<RelaxStats> {
    let n = a.len();
    let mut res = vec![0.0; n];
    let mut it = 0;
    loop {
        let mut residual = 0.0f64;
        for r in 0..n {
            let mut s = a.diag[r] * x[r];
            for (c, v) in a.row(r) {
                s += v * x[c];
            }
            res[r] = b[r] - s;
            residual = residual.max(res[r].abs());
        }
        if residual <= tol {
            return Ok(RelaxStats { iterations: it, residual });
        }
        if it >= max_iters {
            return Err(Error::NonConvergence { solver: "Jacobi relaxation", iterations: it, residual });
        }
        for r in 0..n {
            x[r] += omega * res[r] / a.diag[r];
        }
        it += 1;
    }
}
