//! Rank-one fits (SVD, RSVD, RobRSVD) and sequential deflation.
//!
//! The robust fit alternates conditional penalized weighted least-squares
//! updates of `v` and `u`. Huber weights are recomputed from the current
//! scaled residuals `(x_ij - u_i v_j) / sigma` before each half-step and the
//! smoothing parameters are chosen by GCV inside each half-step.

mod system;
pub(crate) mod update;

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec::Vec;

pub use system::HatTrace;
pub use update::{hat_trace_u, hat_trace_v, update_u_given_v, update_v_given_u};

use crate::error::{contract, Error, Result};
use crate::linalg::dense::Svd;
use crate::loss::{estimate_scale_mad, Huber, RobustLossSpec, ScaleSource};
use crate::matrix::{norm, residual, Matrix, ObservedMatrix, ResidualMatrix, WeightMatrix};
use crate::missing::{fit_with_missing, ImputationOptions, ImputationState};
use crate::penalty::{two_way_penalty, PenaltyKind, RoughnessPenalty, TwoWayPenaltySpec};
use crate::select::{select_lambda_u, select_lambda_v, GcvTrace, LambdaGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    Svd,
    Rsvd,
    #[cfg_attr(feature = "serde", serde(rename = "robrsvd"))]
    RobRsvd,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Svd, Method::Rsvd, Method::RobRsvd];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Svd => "svd",
            Method::Rsvd => "rsvd",
            Method::RobRsvd => "robrsvd",
        }
    }
}

impl core::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svd" => Ok(Method::Svd),
            "rsvd" => Ok(Method::Rsvd),
            "robrsvd" => Ok(Method::RobRsvd),
            other => Err(contract(alloc::format!("unknown method '{other}'"))),
        }
    }
}

/// Grids searched for the row and column smoothing parameters.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PenaltyGrid {
    pub lambda_u: LambdaGrid,
    pub lambda_v: LambdaGrid,
}

impl PenaltyGrid {
    pub fn same(grid: LambdaGrid) -> Self {
        Self {
            lambda_u: grid.clone(),
            lambda_v: grid,
        }
    }

    /// Fixed smoothing parameters (no GCV search).
    pub fn fixed(lambda_u: f64, lambda_v: f64) -> Result<Self> {
        Ok(Self {
            lambda_u: LambdaGrid::single(lambda_u)?,
            lambda_v: LambdaGrid::single(lambda_v)?,
        })
    }
}

/// Options of the alternating IRLS loop.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IrlsOptions {
    /// Relative change of the objective below which the loop stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Stop re-selecting smoothing parameters after this many iterations.
    pub freeze_lambda_after: Option<usize>,
    pub penalty_kind: PenaltyKind,
}

impl Default for IrlsOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 100,
            freeze_lambda_after: Some(5),
            penalty_kind: PenaltyKind::NaturalSpline,
        }
    }
}

impl IrlsOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(contract("tolerance must be positive and max_iter >= 1"));
        }
        Ok(())
    }
}

/// Per-fit diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitDiagnostics {
    /// Objective after initialization and after every half-step.
    pub objective_trace: Vec<f64>,
    /// Scale used to standardize residuals (1 for the squared loss).
    pub sigma: f64,
    /// Iteration after which the smoothing parameters were held fixed.
    pub lambda_frozen_after: Option<usize>,
    pub gcv_v: Option<GcvTrace>,
    pub gcv_u: Option<GcvTrace>,
}

/// One extracted component `s u v^T`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComponentPair {
    pub s: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda_u: f64,
    pub lambda_v: f64,
    pub iterations: usize,
    pub final_objective: f64,
    pub converged: bool,
    pub diagnostics: FitDiagnostics,
}

impl ComponentPair {
    pub fn outer(&self) -> Matrix {
        Matrix::outer(self.s, &self.u, &self.v)
    }
}

/// Flip `(u, v)` jointly so the largest-magnitude entry of `v` is positive.
pub fn apply_sign_convention(u: &mut [f64], v: &mut [f64]) {
    let mut best = 0.0;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = if x < 0.0 { -1.0 } else { 1.0 };
        }
    }
    if sign < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Huber weights at the scaled residuals of the fit `u v^T`; 0 at masked cells.
pub fn robust_weights(x: &ObservedMatrix, u: &[f64], v: &[f64], huber: Huber, sigma: f64) -> WeightMatrix {
    let (m, n) = x.values().shape();
    let mut w = Matrix::zeros(m, n);
    if huber.theta().is_infinite() {
        for i in 0..m {
            for j in 0..n {
                if x.is_observed(i, j) {
                    w[(i, j)] = 2.0;
                }
            }
        }
    } else {
        for i in 0..m {
            let xr = x.values().row(i);
            for j in 0..n {
                if x.is_observed(i, j) {
                    w[(i, j)] = huber.weight((xr[j] - u[i] * v[j]) / sigma);
                }
            }
        }
    }
    WeightMatrix::new(w).expect("Huber weights are finite and nonnegative")
}

/// `sum_obs sigma^2 rho((x_ij - u_i v_j) / sigma) + P(u, v)`.
///
/// Multiplying the loss by `sigma^2` keeps the weighted normal equations
/// (with unscaled data) as the exact stationarity conditions.
pub fn objective(
    x: &ObservedMatrix,
    u: &[f64],
    v: &[f64],
    huber: Huber,
    sigma: f64,
    spec: &TwoWayPenaltySpec,
) -> Result<f64> {
    let (m, n) = x.values().shape();
    let mut loss = 0.0;
    for i in 0..m {
        let xr = x.values().row(i);
        for j in 0..n {
            if x.is_observed(i, j) {
                let r = (xr[j] - u[i] * v[j]) / sigma;
                loss += huber.rho(r);
            }
        }
    }
    Ok(sigma * sigma * loss + two_way_penalty(u, v, spec)?)
}

fn leading_triple(values: &Matrix) -> (f64, Vec<f64>, Vec<f64>) {
    let svd = Svd::compute(values);
    let mut u = svd.left(0);
    let mut v = svd.right(0);
    let s = svd.s[0];
    if s == 0.0 {
        u.iter_mut().for_each(|x| *x = 0.0);
        u[0] = 1.0;
    }
    apply_sign_convention(&mut u, &mut v);
    (s, u, v)
}

/// Leading singular triple; masked cells enter as their stored 0.
pub fn fit_rank_one_svd(x: &ObservedMatrix) -> Result<ComponentPair> {
    let (s, u, v) = leading_triple(x.values());
    let r = residual(x, s, &u, &v)?;
    let rss: f64 = r.observed().map(|e| e * e).sum();
    Ok(ComponentPair {
        s,
        u,
        v,
        lambda_u: 0.0,
        lambda_v: 0.0,
        iterations: 0,
        final_objective: rss,
        converged: true,
        diagnostics: FitDiagnostics {
            objective_trace: alloc::vec![rss],
            sigma: 1.0,
            ..FitDiagnostics::default()
        },
    })
}

/// Residual scale for the robust loss.
pub fn resolve_scale(x: &ObservedMatrix, scale: ScaleSource) -> Result<f64> {
    match scale {
        ScaleSource::Fixed(s) => Ok(s),
        ScaleSource::MadFromSvdResiduals => {
            let (s, u, v) = leading_triple(x.values());
            estimate_scale_mad(&residual(x, s, &u, &v)?)
        }
    }
}

/// Starting point for the alternating loop.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub s: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda_u: f64,
    pub lambda_v: f64,
}

impl From<&ComponentPair> for WarmStart {
    fn from(c: &ComponentPair) -> Self {
        Self {
            s: c.s,
            u: c.u.clone(),
            v: c.v.clone(),
            lambda_u: c.lambda_u,
            lambda_v: c.lambda_v,
        }
    }
}

/// Penalty matrices matching the grids of `x`.
pub fn penalties_for(x: &ObservedMatrix, kind: PenaltyKind) -> Result<(Arc<RoughnessPenalty>, Arc<RoughnessPenalty>)> {
    Ok((
        Arc::new(RoughnessPenalty::new(x.row_grid(), kind)?),
        Arc::new(RoughnessPenalty::new(x.col_grid(), kind)?),
    ))
}

/// The alternating IRLS loop shared by RSVD (`theta = inf`) and RobRSVD.
pub fn irls_rank_one(
    x: &ObservedMatrix,
    huber: Huber,
    sigma: f64,
    grid: &PenaltyGrid,
    opts: &IrlsOptions,
    warm: Option<WarmStart>,
) -> Result<ComponentPair> {
    opts.validate()?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(contract(alloc::format!("scale must be positive, got {sigma}")));
    }
    let (omega_u, omega_v) = penalties_for(x, opts.penalty_kind)?;
    let (start, init_lu, init_lv) = match warm {
        Some(w) => ((w.s, w.u, w.v), w.lambda_u, w.lambda_v),
        None => (leading_triple(x.values()), grid.lambda_u.first(), grid.lambda_v.first()),
    };
    let (s0, mut u, v0) = start;
    let mut lambda_u = init_lu;
    let mut lambda_v = init_lv;
    if grid.lambda_u.len() == 1 {
        lambda_u = grid.lambda_u.first();
    }
    if grid.lambda_v.len() == 1 {
        lambda_v = grid.lambda_v.first();
    }
    // `u` unit norm, `v` carries the scale
    let mut v: Vec<f64> = v0.iter().map(|a| a * s0).collect();
    let mut spec = TwoWayPenaltySpec::new(omega_u, omega_v, lambda_u, lambda_v)?;

    let mut diag = FitDiagnostics {
        sigma,
        ..FitDiagnostics::default()
    };
    let mut prev = objective(x, &u, &v, huber, sigma, &spec)?;
    diag.objective_trace.push(prev);

    let mut converged = false;
    let mut iterations = 0;
    let mut s = s0;
    let mut frozen = false;
    for iter in 1..=opts.max_iter {
        iterations = iter;
        let select = !frozen;

        // v given u (u has unit norm here)
        let w = robust_weights(x, &u, &v, huber, sigma);
        if select && grid.lambda_v.len() > 1 {
            let (lv, trace) = select_lambda_v(x, &u, &w, &spec, &grid.lambda_v)?;
            spec.lambda_v = lv;
            diag.gcv_v = Some(trace);
        }
        let v_new = update_v_given_u(x, &u, &w, &spec)?;
        s = norm(&v_new);
        if !(s > 0.0) || !s.is_finite() {
            return Err(contract("column update collapsed to zero"));
        }
        v = v_new.iter().map(|a| a / s).collect();
        u.iter_mut().for_each(|a| *a *= s);
        diag.objective_trace.push(objective(x, &u, &v, huber, sigma, &spec)?);

        // u given v (v has unit norm here)
        let w = robust_weights(x, &u, &v, huber, sigma);
        if select && grid.lambda_u.len() > 1 {
            let (lu, trace) = select_lambda_u(x, &v, &w, &spec, &grid.lambda_u)?;
            spec.lambda_u = lu;
            diag.gcv_u = Some(trace);
        }
        let u_new = update_u_given_v(x, &v, &w, &spec)?;
        s = norm(&u_new);
        if !(s > 0.0) || !s.is_finite() {
            return Err(contract("row update collapsed to zero"));
        }
        u = u_new.iter().map(|a| a / s).collect();
        v.iter_mut().for_each(|a| *a *= s);
        let obj = objective(x, &u, &v, huber, sigma, &spec)?;
        diag.objective_trace.push(obj);

        if let Some(k) = opts.freeze_lambda_after {
            if !frozen && iter >= k {
                frozen = true;
                diag.lambda_frozen_after = Some(iter);
            }
        }
        let change = (prev - obj).abs();
        prev = obj;
        if change <= opts.tol * obj.abs() || obj == 0.0 {
            converged = true;
            break;
        }
    }

    // v carries the scale s from the last row update
    let mut v: Vec<f64> = v.iter().map(|a| a / s).collect();
    apply_sign_convention(&mut u, &mut v);
    Ok(ComponentPair {
        s,
        u,
        v,
        lambda_u: spec.lambda_u,
        lambda_v: spec.lambda_v,
        iterations,
        final_objective: prev,
        converged,
        diagnostics: diag,
    })
}

/// Regularized SVD: squared loss with GCV-selected roughness penalties.
pub fn fit_rank_one_rsvd(x: &ObservedMatrix, grid: &PenaltyGrid, opts: &IrlsOptions) -> Result<ComponentPair> {
    irls_rank_one(x, Huber::squared(), 1.0, grid, opts, None)
}

/// Robust regularized SVD rank-one fit initialized at the plain SVD.
pub fn fit_rank_one_robrsvd(
    x: &ObservedMatrix,
    loss: &RobustLossSpec,
    grid: &PenaltyGrid,
    opts: &IrlsOptions,
) -> Result<ComponentPair> {
    let sigma = resolve_scale(x, loss.scale)?;
    irls_rank_one(x, loss.huber, sigma, grid, opts, None)
}

/// Everything needed to run a decomposition.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecompositionOptions {
    pub loss: RobustLossSpec,
    pub grid: PenaltyGrid,
    pub irls: IrlsOptions,
    pub imputation: ImputationOptions,
}

/// Rank-one fit by `method` on a fully observed matrix.
pub fn fit_rank_one(x: &ObservedMatrix, method: Method, opts: &DecompositionOptions) -> Result<ComponentPair> {
    match method {
        Method::Svd => fit_rank_one_svd(x),
        Method::Rsvd => fit_rank_one_rsvd(x, &opts.grid, &opts.irls),
        Method::RobRsvd => fit_rank_one_robrsvd(x, &opts.loss, &opts.grid, &opts.irls),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub method: Method,
    pub components: Vec<ComponentPair>,
    /// Imputation state per component when the input had missing cells.
    pub imputation: Vec<Option<ImputationState>>,
    pub residual: ResidualMatrix,
}

impl Decomposition {
    /// `sum_k s_k u_k v_k^T` over the first `rank` components.
    pub fn reconstruction(&self, rank: usize) -> Matrix {
        let (m, n) = self.residual.residuals().shape();
        let mut out = Matrix::zeros(m, n);
        for c in self.components.iter().take(rank) {
            out.add_outer(c.s, &c.u, &c.v);
        }
        out
    }

    /// Row factors as an `m x k` matrix.
    pub fn left_basis(&self) -> Matrix {
        let m = self.residual.residuals().rows();
        Matrix::from_fn(m, self.components.len(), |i, k| self.components[k].u[i])
    }

    pub fn right_basis(&self) -> Matrix {
        let n = self.residual.residuals().cols();
        Matrix::from_fn(n, self.components.len(), |j, k| self.components[k].v[j])
    }
}

/// Sequential rank-`rank` decomposition by deflation. Each component gets
/// its own smoothing parameters and residual scale. Inputs with missing
/// cells go through iterative imputation component by component.
pub fn fit(x: &ObservedMatrix, method: Method, rank: usize, opts: &DecompositionOptions) -> Result<Decomposition> {
    let (m, n) = x.values().shape();
    if rank == 0 || rank > m.min(n) {
        return Err(contract(alloc::format!(
            "rank must be in 1..={}, got {rank}",
            m.min(n)
        )));
    }
    let complete = x.is_complete();
    if !complete {
        x.check_lines_observed()?;
    }
    let mut current = x.clone();
    let mut components = Vec::with_capacity(rank);
    let mut imputation = Vec::with_capacity(rank);
    for k in 0..rank {
        let wrap = |e: Error| Error::Component {
            index: k,
            source: Box::new(e),
        };
        let (pair, state) = if complete {
            (fit_rank_one(&current, method, opts).map_err(wrap)?, None)
        } else {
            let (p, s) = fit_with_missing(&current, method, opts).map_err(wrap)?;
            (p, Some(s))
        };
        let r = residual(&current, pair.s, &pair.u, &pair.v).map_err(wrap)?;
        current = current.with_values(r.residuals().clone()).map_err(wrap)?;
        components.push(pair);
        imputation.push(state);
    }
    let residual = ResidualMatrix::new(current.values().clone(), x.mask().to_vec())?;
    Ok(Decomposition {
        method,
        components,
        imputation,
        residual,
    })
}

/// Objective of an extracted pair on `x` at its own smoothing parameters.
pub fn pair_objective(
    x: &ObservedMatrix,
    pair: &ComponentPair,
    huber: Huber,
    kind: PenaltyKind,
) -> Result<f64> {
    let (ou, ov) = penalties_for(x, kind)?;
    let spec = TwoWayPenaltySpec::new(ou, ov, pair.lambda_u, pair.lambda_v)?;
    let v: Vec<f64> = pair.v.iter().map(|a| a * pair.s).collect();
    objective(x, &pair.u, &v, huber, pair.diagnostics.sigma, &spec)
}
