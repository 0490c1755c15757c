//! Symmetric banded matrices with LDL^T factorization and selected inversion.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Symmetric `n x n` matrix with half-bandwidth `bw`, lower band stored
/// row by row: slot `k` of row `i` holds `a(i, i - k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Entry `(i, j)`; zero outside the band.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        if k > self.bw {
            0.0
        } else {
            self.data[i * (self.bw + 1) + k]
        }
    }

    #[inline]
    fn slot(&mut self, i: usize, j: usize) -> &mut f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        assert!(k <= self.bw, "entry ({i}, {j}) outside band {}", self.bw);
        &mut self.data[i * (self.bw + 1) + k]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        *self.slot(i, j) = value;
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        *self.slot(i, j) += value;
    }

    pub fn add_diagonal(&mut self, d: &[f64]) {
        for (i, &x) in d.iter().enumerate() {
            self.add(i, i, x);
        }
    }

    pub fn scale(&mut self, c: f64) {
        for x in &mut self.data {
            *x *= c;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw).min(self.n - 1);
            y[i] = (lo..=hi).map(|j| self.get(i, j) * x[j]).sum();
        }
        y
    }

    pub fn to_dense(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// `A = L D L^T` with unit lower-triangular banded `L`.
#[derive(Debug, Clone)]
pub struct BandedLdl {
    n: usize,
    bw: usize,
    /// Strict lower band of `L`, same layout as [`SymBanded`] (slot 0 unused).
    l: Vec<f64>,
    d: Vec<f64>,
}

impl BandedLdl {
    /// Factor a symmetric positive definite banded matrix.
    pub fn factor(a: &SymBanded) -> Result<Self> {
        let n = a.n;
        let bw = a.bw;
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        let mut d = vec![0.0; n];
        let scale = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
        let tiny = scale * 1e-14;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..i {
                let mut s = a.get(i, j);
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    s -= l[i * w + (i - k)] * d[k] * l[j * w + (j - k)];
                }
                l[i * w + (i - j)] = s / d[j];
            }
            let mut di = a.get(i, i);
            for k in lo..i {
                let lik = l[i * w + (i - k)];
                di -= lik * lik * d[k];
            }
            if !(di > tiny) || !di.is_finite() {
                return Err(Error::NotPositiveDefinite(i));
            }
            d[i] = di;
        }
        Ok(Self { n, bw, l, d })
    }

    #[inline]
    fn lower(&self, i: usize, j: usize) -> f64 {
        // i > j, i - j <= bw
        self.l[i * (self.bw + 1) + (i - j)]
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let lo = i.saturating_sub(self.bw);
            let mut s = b[i];
            for k in lo..i {
                s -= self.lower(i, k) * b[k];
            }
            b[i] = s;
        }
        for (bi, di) in b.iter_mut().zip(&self.d) {
            *bi /= di;
        }
        for i in (0..n).rev() {
            let hi = (i + self.bw).min(n - 1);
            let mut s = b[i];
            for k in i + 1..=hi {
                s -= self.lower(k, i) * b[k];
            }
            b[i] = s;
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Entries of `A^{-1}` inside the band of `A`, via the backward
    /// Takahashi recurrence on the LDL^T factors (O(n bw^2)).
    pub fn inverse_band(&self) -> SymBanded {
        let n = self.n;
        let bw = self.bw;
        let mut sigma = SymBanded::zeros(n, bw);
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            for j in (i + 1..=hi).rev() {
                let mut s = 0.0;
                for k in i + 1..=hi {
                    s -= self.lower(k, i) * sigma.get(k, j);
                }
                sigma.set(j, i, s);
            }
            let mut s = 1.0 / self.d[i];
            for k in i + 1..=hi {
                s -= self.lower(k, i) * sigma.get(k, i);
            }
            sigma.set(i, i, s);
        }
        sigma
    }
}
