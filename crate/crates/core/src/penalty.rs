//! Roughness penalty matrices and the two-way penalty.
//!
//! Every penalty here has the factored form `Omega = Q R^{-1} Q^T`, where
//! `Q` is `k x (k-2)` with three nonzeros per column and `R` is symmetric
//! positive definite tridiagonal. For the natural cubic spline penalty
//! `R^{-1} Q^T f` is the vector of second derivatives of the interpolating
//! spline at the interior knots and `f^T Omega f = int g''(t)^2 dt`.
//! `Omega` itself is dense, but every solve against `E + c Omega`
//! (`E` diagonal) reduces to a pentadiagonal system.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, contract, Result};
use crate::linalg::banded::{BandedLdl, SymBanded};
use crate::matrix::{check_grid, dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PenaltyKind {
    /// Integrated squared second derivative of the natural cubic spline
    /// interpolant.
    NaturalSpline,
    /// Squared second differences scaled by the mean grid spacing; meant
    /// for equally spaced grids.
    SecondDifference,
}

#[derive(Debug, Clone)]
pub struct RoughnessPenalty {
    kind: PenaltyKind,
    grid: Vec<f64>,
    /// Column `c` of `Q` has entries at rows `c`, `c+1`, `c+2`.
    q: Vec<[f64; 3]>,
    r: SymBanded,
    r_ldl: BandedLdl,
}

impl RoughnessPenalty {
    pub fn new(grid: &[f64], kind: PenaltyKind) -> Result<Self> {
        let k = grid.len();
        if k < 3 {
            return Err(contract(alloc::format!(
                "roughness penalty needs at least 3 grid points, got {k}"
            )));
        }
        check_grid(grid, "penalty grid")?;
        let inner = k - 2;
        let mut q = Vec::with_capacity(inner);
        let mut r = SymBanded::zeros(inner, 1);
        match kind {
            PenaltyKind::NaturalSpline => {
                let h: Vec<f64> = grid.windows(2).map(|w| w[1] - w[0]).collect();
                for c in 0..inner {
                    let (h0, h1) = (h[c], h[c + 1]);
                    q.push([1.0 / h0, -1.0 / h0 - 1.0 / h1, 1.0 / h1]);
                    r.set(c, c, (h0 + h1) / 3.0);
                    if c + 1 < inner {
                        r.set(c + 1, c, h1 / 6.0);
                    }
                }
            }
            PenaltyKind::SecondDifference => {
                let h = (grid[k - 1] - grid[0]) / (k - 1) as f64;
                let a = 1.0 / (h * h);
                for c in 0..inner {
                    q.push([a, -2.0 * a, a]);
                    r.set(c, c, 1.0 / h);
                }
            }
        }
        let r_ldl = BandedLdl::factor(&r)?;
        Ok(Self {
            kind,
            grid: grid.to_vec(),
            q,
            r,
            r_ldl,
        })
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    /// `Q^T f`, length `k - 2`.
    pub fn qt_mul(&self, f: &[f64]) -> Vec<f64> {
        self.q
            .iter()
            .enumerate()
            .map(|(c, col)| col[0] * f[c] + col[1] * f[c + 1] + col[2] * f[c + 2])
            .collect()
    }

    /// `Q g`, length `k`.
    pub fn q_mul(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (c, col) in self.q.iter().enumerate() {
            out[c] += col[0] * g[c];
            out[c + 1] += col[1] * g[c];
            out[c + 2] += col[2] * g[c];
        }
        out
    }

    /// Second derivatives of the natural spline interpolant at the interior
    /// knots, `R^{-1} Q^T f`.
    pub fn interior_second_derivatives(&self, f: &[f64]) -> Vec<f64> {
        self.r_ldl.solve(&self.qt_mul(f))
    }

    /// `f^T Omega f` in O(k).
    pub fn quad_form(&self, f: &[f64]) -> Result<f64> {
        check_len("penalty vector length", self.dim(), f.len())?;
        let qf = self.qt_mul(f);
        let g = self.r_ldl.solve(&qf);
        Ok(dot(&qf, &g).max(0.0))
    }

    /// `Omega f`.
    pub fn mul_vec(&self, f: &[f64]) -> Vec<f64> {
        self.q_mul(&self.interior_second_derivatives(f))
    }

    pub(crate) fn q_columns(&self) -> &[[f64; 3]] {
        &self.q
    }

    pub(crate) fn r_band(&self) -> &SymBanded {
        &self.r
    }

    /// Dense `k x k` matrix.
    pub fn to_dense(&self) -> Matrix {
        let k = self.dim();
        let mut out = Matrix::zeros(k, k);
        let mut e = vec![0.0; k];
        for j in 0..k {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.mul_vec(&e);
            for i in 0..k {
                out[(i, j)] = col[i];
            }
        }
        // exact symmetry
        for i in 0..k {
            for j in 0..i {
                let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        out
    }
}

/// Natural cubic spline roughness matrix on `grid`.
pub fn build_roughness_penalty(grid: &[f64]) -> Result<RoughnessPenalty> {
    RoughnessPenalty::new(grid, PenaltyKind::NaturalSpline)
}

/// Penalty matrices for both sides with their smoothing parameters.
#[derive(Debug, Clone)]
pub struct TwoWayPenaltySpec {
    pub omega_u: Arc<RoughnessPenalty>,
    pub omega_v: Arc<RoughnessPenalty>,
    pub lambda_u: f64,
    pub lambda_v: f64,
}

impl TwoWayPenaltySpec {
    pub fn new(
        omega_u: Arc<RoughnessPenalty>,
        omega_v: Arc<RoughnessPenalty>,
        lambda_u: f64,
        lambda_v: f64,
    ) -> Result<Self> {
        let spec = Self {
            omega_u,
            omega_v,
            lambda_u,
            lambda_v,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Natural spline penalties on both grids.
    pub fn natural_spline(row_grid: &[f64], col_grid: &[f64], lambda_u: f64, lambda_v: f64) -> Result<Self> {
        Self::new(
            Arc::new(build_roughness_penalty(row_grid)?),
            Arc::new(build_roughness_penalty(col_grid)?),
            lambda_u,
            lambda_v,
        )
    }

    pub fn with_lambdas(&self, lambda_u: f64, lambda_v: f64) -> Result<Self> {
        Self::new(self.omega_u.clone(), self.omega_v.clone(), lambda_u, lambda_v)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for (name, l) in [("lambda_u", self.lambda_u), ("lambda_v", self.lambda_v)] {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(contract(alloc::format!("{name} must be finite and >= 0, got {l}")));
            }
        }
        Ok(())
    }

    /// The same penalty with the roles of rows and columns exchanged.
    pub fn transposed(&self) -> Self {
        Self {
            omega_u: self.omega_v.clone(),
            omega_v: self.omega_u.clone(),
            lambda_u: self.lambda_v,
            lambda_v: self.lambda_u,
        }
    }
}

/// `lu (u'Ou u) |v|^2 + lv (v'Ov v) |u|^2 + lu (u'Ou u) lv (v'Ov v)`.
pub fn two_way_penalty(u: &[f64], v: &[f64], spec: &TwoWayPenaltySpec) -> Result<f64> {
    spec.validate()?;
    let au = spec.lambda_u * spec.omega_u.quad_form(u)?;
    let av = spec.lambda_v * spec.omega_v.quad_form(v)?;
    Ok(au * dot(v, v) + av * dot(u, u) + au * av)
}

/// `Omega_{v|u} = shift I + scale Omega_v`: the quadratic penalty on the
/// free vector induced by the two-way penalty when the other vector is held
/// fixed.
#[derive(Debug, Clone)]
pub struct ConditionalPenalty {
    pub shift: f64,
    pub scale: f64,
    pub omega: Arc<RoughnessPenalty>,
}

impl ConditionalPenalty {
    /// Penalty on `v` given `u`.
    pub fn for_v(u: &[f64], spec: &TwoWayPenaltySpec) -> Result<Self> {
        spec.validate()?;
        check_len("u length", spec.omega_u.dim(), u.len())?;
        let rough = spec.lambda_u * spec.omega_u.quad_form(u)?;
        Ok(Self {
            shift: rough,
            scale: (dot(u, u) + rough) * spec.lambda_v,
            omega: spec.omega_v.clone(),
        })
    }

    /// Penalty on `u` given `v`.
    pub fn for_u(v: &[f64], spec: &TwoWayPenaltySpec) -> Result<Self> {
        Self::for_v(v, &spec.transposed())
    }

    pub fn dim(&self) -> usize {
        self.omega.dim()
    }

    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        let o = if self.scale == 0.0 {
            0.0
        } else {
            self.scale * self.omega.quad_form(x)?
        };
        Ok(self.shift * dot(x, x) + o)
    }

    pub fn to_dense(&self) -> Matrix {
        let k = self.dim();
        let mut m = self.omega.to_dense().scale(self.scale);
        for i in 0..k {
            m[(i, i)] += self.shift;
        }
        m
    }
}

/// Dense `Omega_{v|u}`.
pub fn conditional_penalty_v(u: &[f64], spec: &TwoWayPenaltySpec) -> Result<Matrix> {
    Ok(ConditionalPenalty::for_v(u, spec)?.to_dense())
}

/// Dense `Omega_{u|v}`.
pub fn conditional_penalty_u(v: &[f64], spec: &TwoWayPenaltySpec) -> Result<Matrix> {
    Ok(ConditionalPenalty::for_u(v, spec)?.to_dense())
}
