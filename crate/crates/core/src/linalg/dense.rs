//! Small dense factorizations: Cholesky, one-sided Jacobi SVD, thin QR.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, Error, Result};
use crate::matrix::{dot, Matrix};

/// Lower Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn factor(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(contract("Cholesky needs a square matrix"));
        }
        let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > scale * 1e-14) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite(j));
            }
            let d = libm::sqrt(d);
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.l.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Thin singular value decomposition `A = U diag(s) V^T`, singular values
/// in nonincreasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m x k` left singular vectors (columns).
    pub u: Matrix,
    pub s: Vec<f64>,
    /// `n x k` right singular vectors (columns).
    pub v: Matrix,
}

impl Svd {
    /// One-sided (Hestenes) Jacobi SVD. Accurate to working precision for
    /// the moderate sizes handled here.
    pub fn compute(a: &Matrix) -> Self {
        let (m, n) = a.shape();
        if m < n {
            let t = Self::compute(&a.transpose());
            return Self {
                u: t.v,
                s: t.s,
                v: t.u,
            };
        }
        // columns of A (m x n, m >= n) and accumulated right rotations
        let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
        let mut vcols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect();
        let eps = f64::EPSILON;
        for _sweep in 0..60 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let alpha = dot(&cols[p], &cols[p]);
                    let beta = dot(&cols[q], &cols[q]);
                    let gamma = dot(&cols[p], &cols[q]);
                    if gamma == 0.0 || gamma.abs() <= eps * libm::sqrt(alpha * beta) {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                    let c = 1.0 / libm::sqrt(1.0 + t * t);
                    let s = c * t;
                    rotate(&mut cols, p, q, c, s);
                    rotate(&mut vcols, p, q, c, s);
                }
            }
            if !rotated {
                break;
            }
        }
        let mut order: Vec<(usize, f64)> = cols
            .iter()
            .enumerate()
            .map(|(j, c)| (j, libm::sqrt(dot(c, c))))
            .collect();
        order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut u = Matrix::zeros(m, n);
        let mut v = Matrix::zeros(n, n);
        let mut s = Vec::with_capacity(n);
        for (k, &(j, sj)) in order.iter().enumerate() {
            s.push(sj);
            if sj > 0.0 {
                for i in 0..m {
                    u[(i, k)] = cols[j][i] / sj;
                }
            }
            for i in 0..n {
                v[(i, k)] = vcols[j][i];
            }
        }
        Self { u, s, v }
    }

    pub fn left(&self, k: usize) -> Vec<f64> {
        self.u.column(k)
    }

    pub fn right(&self, k: usize) -> Vec<f64> {
        self.v.column(k)
    }
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let cp = &mut head[p];
    let cq = &mut tail[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Orthonormal basis for the column span of `a` (Gram-Schmidt with one
/// reorthogonalization pass). Fails if `a` is numerically rank deficient.
pub fn orthonormal_columns(a: &Matrix) -> Result<Matrix> {
    let (m, k) = a.shape();
    if k > m {
        return Err(contract("more basis vectors than ambient dimension"));
    }
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut c = a.column(j);
        let original = libm::sqrt(dot(&c, &c));
        for _ in 0..2 {
            for prev in &q {
                let r = dot(prev, &c);
                for (x, p) in c.iter_mut().zip(prev) {
                    *x -= r * p;
                }
            }
        }
        let nrm = libm::sqrt(dot(&c, &c));
        if original == 0.0 || nrm <= 1e-10 * original {
            return Err(contract(alloc::format!(
                "basis is rank deficient at column {j}"
            )));
        }
        c.iter_mut().for_each(|x| *x /= nrm);
        q.push(c);
    }
    Ok(Matrix::from_fn(m, k, |i, j| q[j][i]))
}
