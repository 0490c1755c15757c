//! Solver for the conditional normal equations
//! `(D + 2 Omega_{v|u}) x = b` with `D` diagonal and
//! `Omega_{v|u} = shift I + scale Q R^{-1} Q^T`.
//!
//! Writing `E = D + 2 shift I` and `c = 2 scale`, the Woodbury identity gives
//! `(E + c Q R^{-1} Q^T)^{-1} = E^{-1} - E^{-1} Q M^{-1} Q^T E^{-1}` with the
//! pentadiagonal `M = R / c + Q^T E^{-1} Q`. When some `E_j` vanishes the
//! system is materialized and factored densely instead.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Axis, Error, Result};
use crate::linalg::banded::{BandedLdl, SymBanded};
use crate::linalg::dense::Cholesky;
use crate::matrix::Matrix;
use crate::penalty::ConditionalPenalty;

/// Hat-matrix trace and its complement `dim - trace`, the latter computed
/// without cancellation on the structured path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HatTrace {
    pub trace: f64,
    pub residual_df: f64,
}

pub(crate) struct ConditionalSystem<'a> {
    d: &'a [f64],
    e: Vec<f64>,
    c: f64,
    penalty: &'a ConditionalPenalty,
    kind: Kind,
}

enum Kind {
    Diagonal,
    Woodbury { m: BandedLdl },
    Dense { chol: Cholesky },
}

/// Relative size below which a diagonal entry of `E` counts as zero for
/// the Woodbury route.
const WOODBURY_FLOOR: f64 = 1e-10;

impl<'a> ConditionalSystem<'a> {
    pub(crate) fn new(d: &'a [f64], penalty: &'a ConditionalPenalty, axis: Axis) -> Result<Self> {
        let n = d.len();
        let e: Vec<f64> = d.iter().map(|&dj| dj + 2.0 * penalty.shift).collect();
        let c = 2.0 * penalty.scale;
        if c == 0.0 {
            if let Some(j) = e.iter().position(|&x| !(x > 0.0)) {
                return Err(Error::DegenerateIndex { axis, index: j });
            }
            return Ok(Self {
                d,
                e,
                c,
                penalty,
                kind: Kind::Diagonal,
            });
        }
        let emax = e.iter().copied().fold(0.0, f64::max);
        if emax > 0.0 && e.iter().all(|&x| x > WOODBURY_FLOOR * emax) {
            let omega = &penalty.omega;
            let q = omega.q_columns();
            let r = omega.r_band();
            let inner = n - 2;
            let mut m = SymBanded::zeros(inner, 2);
            for a in 0..inner {
                m.set(a, a, r.get(a, a) / c);
                if a + 1 < inner {
                    m.set(a + 1, a, r.get(a + 1, a) / c);
                }
            }
            // (Q^T E^{-1} Q)_{ab} = sum_r Q_ra Q_rb / E_r, column a touches rows a..a+2
            for a in 0..inner {
                for b in a..(a + 3).min(inner) {
                    let mut s = 0.0;
                    for row in b..=(a + 2) {
                        s += q[a][row - a] * q[b][row - b] / e[row];
                    }
                    m.add(b, a, s);
                }
            }
            let m = BandedLdl::factor(&m)?;
            return Ok(Self {
                d,
                e,
                c,
                penalty,
                kind: Kind::Woodbury { m },
            });
        }
        let mut a = penalty.omega.to_dense().scale(c);
        for j in 0..n {
            a[(j, j)] += e[j];
        }
        let chol = Cholesky::factor(&a).map_err(|_| {
            let j = e.iter().position(|&x| !(x > 0.0)).unwrap_or(0);
            Error::DegenerateIndex { axis, index: j }
        })?;
        Ok(Self {
            d,
            e,
            c,
            penalty,
            kind: Kind::Dense { chol },
        })
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Diagonal => b.iter().zip(&self.e).map(|(bj, ej)| bj / ej).collect(),
            Kind::Woodbury { m } => {
                let y: Vec<f64> = b.iter().zip(&self.e).map(|(bj, ej)| bj / ej).collect();
                let z = m.solve(&self.penalty.omega.qt_mul(&y));
                let qz = self.penalty.omega.q_mul(&z);
                y.iter()
                    .zip(&qz)
                    .zip(&self.e)
                    .map(|((yj, qj), ej)| yj - qj / ej)
                    .collect()
            }
            Kind::Dense { chol } => chol.solve(b),
        }
    }

    /// `tr((D + 2 Omega)^{-1} D)`.
    pub(crate) fn hat_trace(&self) -> HatTrace {
        let n = self.d.len();
        match &self.kind {
            Kind::Diagonal => {
                let mut trace = 0.0;
                let mut df = 0.0;
                for (dj, ej) in self.d.iter().zip(&self.e) {
                    trace += dj / ej;
                    df += (ej - dj) / ej;
                }
                HatTrace {
                    trace,
                    residual_df: df,
                }
            }
            Kind::Woodbury { m } => {
                let sigma = m.inverse_band();
                let q = self.penalty.omega.q_columns();
                let inner = n - 2;
                let mut trace = 0.0;
                let mut df = 0.0;
                for j in 0..n {
                    // t_j = (Q M^{-1} Q^T)_jj over columns a with a <= j <= a + 2
                    let lo = j.saturating_sub(2);
                    let hi = j.min(inner - 1);
                    let mut t = 0.0;
                    for a in lo..=hi {
                        for b in lo..=hi {
                            t += q[a][j - a] * sigma.get(a, b) * q[b][j - b];
                        }
                    }
                    let (dj, ej) = (self.d[j], self.e[j]);
                    let inv_jj = (1.0 - t / ej) / ej;
                    trace += dj * inv_jj;
                    df += (ej - dj) / ej + dj * t / (ej * ej);
                }
                HatTrace {
                    trace,
                    residual_df: df,
                }
            }
            Kind::Dense { chol } => {
                let inv = chol.inverse();
                let mut trace = 0.0;
                let mut df = 0.0;
                for j in 0..n {
                    let h = self.d[j] * inv[(j, j)];
                    trace += h;
                    df += 1.0 - h;
                }
                HatTrace {
                    trace,
                    residual_df: df,
                }
            }
        }
    }

    /// Dense system matrix, for diagnostics and tests.
    #[allow(dead_code)]
    pub(crate) fn to_dense(&self) -> Matrix {
        let n = self.d.len();
        let mut a = if self.c == 0.0 {
            Matrix::zeros(n, n)
        } else {
            self.penalty.omega.to_dense().scale(self.c)
        };
        for j in 0..n {
            a[(j, j)] += self.e[j];
        }
        a
    }
}

/// Diagonal of `U^T W U` and the vector `U^T W Y` for the update of the
/// column factor given the row factor (`axis = Column`), or the mirror
/// quantities for the row factor (`axis = Row`).
pub(crate) struct NormalEquations {
    pub diag: Vec<f64>,
    pub rhs: Vec<f64>,
}

pub(crate) fn normal_equations(
    values: &Matrix,
    mask: Option<&[bool]>,
    weights: &Matrix,
    fixed: &[f64],
    free_axis: Axis,
) -> NormalEquations {
    let (m, n) = values.shape();
    let len = match free_axis {
        Axis::Column => n,
        Axis::Row => m,
    };
    let mut diag = vec![0.0; len];
    let mut rhs = vec![0.0; len];
    for i in 0..m {
        let xr = values.row(i);
        let wr = weights.row(i);
        for j in 0..n {
            if let Some(mask) = mask {
                if !mask[i * n + j] {
                    continue;
                }
            }
            let w = wr[j];
            let (free, a) = match free_axis {
                Axis::Column => (j, fixed[i]),
                Axis::Row => (i, fixed[j]),
            };
            diag[free] += a * a * w;
            rhs[free] += a * w * xr[j];
        }
    }
    NormalEquations { diag, rhs }
}

/// Diagonal of `U^T W U` only.
pub(crate) fn weighted_gram(weights: &Matrix, fixed: &[f64], free_axis: Axis) -> Vec<f64> {
    let (m, n) = weights.shape();
    let mut diag = vec![0.0; if free_axis == Axis::Column { n } else { m }];
    for i in 0..m {
        let wr = weights.row(i);
        for j in 0..n {
            match free_axis {
                Axis::Column => diag[j] += fixed[i] * fixed[i] * wr[j],
                Axis::Row => diag[i] += fixed[j] * fixed[j] * wr[j],
            }
        }
    }
    diag
}
