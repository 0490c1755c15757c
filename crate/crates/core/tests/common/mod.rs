//! Dense, explicitly materialized reference computations.
//!
//! Nothing here calls the structured solvers under test. Penalty matrices
//! are rebuilt from the textbook `Q R^{-1} Q^T` formulas with dense
//! inverses, and the conditional systems are assembled as full `mn`-row
//! design matrices.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robrsvd_core::{Huber, Matrix, ObservedMatrix, TwoWayPenaltySpec, WeightMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_dense(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn rel_err_scalar(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

/// Natural cubic spline roughness matrix from dense `Q` and `R^{-1}`.
pub fn dense_omega(grid: &[f64]) -> DMatrix<f64> {
    let k = grid.len();
    let h: Vec<f64> = grid.windows(2).map(|w| w[1] - w[0]).collect();
    let mut q = DMatrix::zeros(k, k - 2);
    let mut r = DMatrix::zeros(k - 2, k - 2);
    for j in 1..k - 1 {
        q[(j - 1, j - 1)] = 1.0 / h[j - 1];
        q[(j, j - 1)] = -1.0 / h[j - 1] - 1.0 / h[j];
        q[(j + 1, j - 1)] = 1.0 / h[j];
        r[(j - 1, j - 1)] = (h[j - 1] + h[j]) / 3.0;
        if j < k - 2 {
            r[(j - 1, j)] = h[j] / 6.0;
            r[(j, j - 1)] = h[j] / 6.0;
        }
    }
    let rinv = r.try_inverse().expect("R is positive definite");
    &q * rinv * q.transpose()
}

/// `u'(I + lu Ou)u (I + lv Ov) - u'u I`.
pub fn dense_conditional(u: &[f64], ou: &DMatrix<f64>, ov: &DMatrix<f64>, lu: f64, lv: f64) -> DMatrix<f64> {
    let uv = DVector::from_column_slice(u);
    let m = u.len();
    let a = (uv.transpose() * (DMatrix::identity(m, m) + ou * lu) * &uv)[(0, 0)];
    let n = ov.nrows();
    (DMatrix::identity(n, n) + ov * lv) * a - DMatrix::identity(n, n) * uv.dot(&uv)
}

/// The full column-update system. `Y` is stacked column by column so that
/// `vec(u v^T) = U v` with `U = I_n (x) u`.
pub struct DenseSystem {
    pub design: DMatrix<f64>,
    pub weights: DVector<f64>,
    pub y: DVector<f64>,
    pub penalty: DMatrix<f64>,
}

impl DenseSystem {
    pub fn for_v(x: &Matrix, w: &Matrix, u: &[f64], penalty: DMatrix<f64>) -> Self {
        let (m, n) = x.shape();
        let mut design = DMatrix::zeros(m * n, n);
        let mut weights = DVector::zeros(m * n);
        let mut y = DVector::zeros(m * n);
        for j in 0..n {
            for i in 0..m {
                let r = j * m + i;
                design[(r, j)] = u[i];
                weights[r] = w[(i, j)];
                y[r] = x[(i, j)];
            }
        }
        Self {
            design,
            weights,
            y,
            penalty,
        }
    }

    /// Row update, `Y*` stacked row by row so that `vec(u v^T) = V u`.
    pub fn for_u(x: &Matrix, w: &Matrix, v: &[f64], penalty: DMatrix<f64>) -> Self {
        Self::for_v(&x.transpose(), &w.transpose(), v, penalty)
    }

    fn gram(&self) -> DMatrix<f64> {
        let wd = DMatrix::from_diagonal(&self.weights);
        self.design.transpose() * wd * &self.design
    }

    fn rhs(&self) -> DVector<f64> {
        let wd = DMatrix::from_diagonal(&self.weights);
        self.design.transpose() * wd * &self.y
    }

    pub fn solve(&self) -> Vec<f64> {
        let a = self.gram() + &self.penalty * 2.0;
        a.lu().solve(&self.rhs()).expect("nonsingular").as_slice().to_vec()
    }

    pub fn unpenalized(&self) -> Vec<f64> {
        self.gram().lu().solve(&self.rhs()).expect("nonsingular").as_slice().to_vec()
    }

    /// `tr(U (U'WU + 2 Omega)^{-1} U'W)` from the explicit `mn x mn` hat matrix.
    pub fn hat_trace(&self) -> f64 {
        let a = self.gram() + &self.penalty * 2.0;
        let ainv = a.try_inverse().expect("nonsingular");
        let wd = DMatrix::from_diagonal(&self.weights);
        let h = &self.design * ainv * self.design.transpose() * wd;
        h.trace()
    }

    pub fn gcv(&self) -> f64 {
        let k = self.design.ncols() as f64;
        let fit = self.solve();
        let raw = self.unpenalized();
        let num = fit.iter().zip(&raw).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / k;
        let den = 1.0 - self.hat_trace() / k;
        num / (den * den)
    }
}

/// A random small instance with missing cells, outliers and Huber weights.
pub struct Case {
    pub x: ObservedMatrix,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: WeightMatrix,
    pub spec: TwoWayPenaltySpec,
}

pub fn random_grid(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut t = 0.0;
    (0..k)
        .map(|_| {
            t += rng.random_range(0.2..1.0);
            t
        })
        .collect()
}

pub fn random_case(seed: u64, max_cells: usize) -> Case {
    let mut r = rng(seed);
    let (m, n) = loop {
        let m = r.random_range(3..=12);
        let n = r.random_range(3..=12);
        if m * n <= max_cells {
            break (m, n);
        }
    };
    let u: Vec<f64> = (0..m).map(|_| r.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
    let mut vals = Matrix::from_fn(m, n, |i, j| u[i] * v[j]);
    for x in vals.as_mut_slice() {
        *x += 0.3 * r.random_range(-1.0..1.0);
    }
    for _ in 0..r.random_range(0..3) {
        let (i, j) = (r.random_range(0..m), r.random_range(0..n));
        vals[(i, j)] += 20.0;
    }
    // keep at least one observed cell in every row and column
    let mask: Vec<bool> = (0..m * n)
        .map(|c| {
            let (i, j) = (c / n, c % n);
            i == j % m || j == i % n || r.random::<f64>() > 0.15
        })
        .collect();
    let x = ObservedMatrix::new(vals, mask, random_grid(m, &mut r), random_grid(n, &mut r)).unwrap();
    let huber = Huber::new(1.345).unwrap();
    let sigma = 0.4;
    let mut w = Matrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            if x.is_observed(i, j) {
                w[(i, j)] = huber.weight((x.values()[(i, j)] - u[i] * v[j]) / sigma);
            }
        }
    }
    let lu = 10f64.powf(r.random_range(-3.0..0.5));
    let lv = 10f64.powf(r.random_range(-3.0..0.5));
    let spec = TwoWayPenaltySpec::natural_spline(x.row_grid(), x.col_grid(), lu, lv).unwrap();
    Case {
        x,
        u,
        v,
        w: WeightMatrix::new(w).unwrap(),
        spec,
    }
}

impl Case {
    pub fn omegas(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        (dense_omega(self.x.row_grid()), dense_omega(self.x.col_grid()))
    }

    pub fn system_v(&self) -> DenseSystem {
        let (ou, ov) = self.omegas();
        let p = dense_conditional(&self.u, &ou, &ov, self.spec.lambda_u, self.spec.lambda_v);
        DenseSystem::for_v(self.x.values(), self.w.as_matrix(), &self.u, p)
    }

    pub fn system_u(&self) -> DenseSystem {
        let (ou, ov) = self.omegas();
        let p = dense_conditional(&self.v, &ov, &ou, self.spec.lambda_v, self.spec.lambda_u);
        DenseSystem::for_u(self.x.values(), self.w.as_matrix(), &self.v, p)
    }
}

/// `int_a^b g(t)^2 dt` by composite Gauss-Legendre (5 points per panel).
pub fn gauss_legendre(g: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let nodes = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    let weights = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let (l, r) = (a + p as f64 * h, a + (p + 1) as f64 * h);
        let (mid, half) = (0.5 * (l + r), 0.5 * (r - l));
        for (x, w) in nodes.iter().zip(weights) {
            total += w * half * g(mid + half * x);
        }
    }
    total
}

/// Natural cubic spline through `(grid, f)` by solving the dense tridiagonal
/// system for second derivatives, returned as a closure for `g''`.
pub fn dense_spline_second(grid: &[f64], f: &[f64]) -> impl Fn(f64) -> f64 {
    let k = grid.len();
    let h: Vec<f64> = grid.windows(2).map(|w| w[1] - w[0]).collect();
    let mut a = DMatrix::zeros(k, k);
    let mut b = DVector::zeros(k);
    a[(0, 0)] = 1.0;
    a[(k - 1, k - 1)] = 1.0;
    for i in 1..k - 1 {
        a[(i, i - 1)] = h[i - 1] / 6.0;
        a[(i, i)] = (h[i - 1] + h[i]) / 3.0;
        a[(i, i + 1)] = h[i] / 6.0;
        b[i] = (f[i + 1] - f[i]) / h[i] - (f[i] - f[i - 1]) / h[i - 1];
    }
    let gamma = a.lu().solve(&b).unwrap();
    let grid = grid.to_vec();
    move |t: f64| {
        let i = grid.windows(2).position(|w| t <= w[1]).unwrap_or(grid.len() - 2);
        let (l, r) = (grid[i], grid[i + 1]);
        ((t - l) * gamma[i + 1] + (r - t) * gamma[i]) / (r - l)
    }
}
