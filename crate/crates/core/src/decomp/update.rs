//! Conditional penalized weighted least-squares updates and hat traces.
//!
//! The column update solves `(U^T W U + 2 Omega_{v|u}) v = U^T W Y` where
//! `U^T W U = diag_j(sum_i u_i^2 w_ij)` and `(U^T W Y)_j = sum_i u_i w_ij x_ij`;
//! the row update is its mirror image. No `mn`-sized matrix is formed.

use alloc::vec::Vec;

use super::system::{normal_equations, weighted_gram, ConditionalSystem, HatTrace};
use crate::error::{check_len, contract, Axis, Error, Result};
use crate::matrix::{ObservedMatrix, WeightMatrix};
use crate::penalty::{ConditionalPenalty, TwoWayPenaltySpec};

pub(crate) struct ConditionalFit {
    pub estimate: Vec<f64>,
    pub unpenalized: Vec<f64>,
    pub hat: HatTrace,
}

fn check_inputs(
    x_shape: (usize, usize),
    fixed: &[f64],
    w: &WeightMatrix,
    spec: &TwoWayPenaltySpec,
    free: Axis,
) -> Result<()> {
    let (m, n) = x_shape;
    check_len("weight rows", m, w.as_matrix().rows())?;
    check_len("weight cols", n, w.as_matrix().cols())?;
    check_len("row penalty size", m, spec.omega_u.dim())?;
    check_len("column penalty size", n, spec.omega_v.dim())?;
    match free {
        Axis::Column => check_len("u length", m, fixed.len())?,
        Axis::Row => check_len("v length", n, fixed.len())?,
    }
    if fixed.iter().all(|&a| a == 0.0) {
        return Err(contract("fixed factor must be nonzero"));
    }
    spec.validate()
}

fn penalty_for(fixed: &[f64], spec: &TwoWayPenaltySpec, free: Axis) -> Result<ConditionalPenalty> {
    match free {
        Axis::Column => ConditionalPenalty::for_v(fixed, spec),
        Axis::Row => ConditionalPenalty::for_u(fixed, spec),
    }
}

pub(crate) fn conditional_fit(
    x: &ObservedMatrix,
    fixed: &[f64],
    w: &WeightMatrix,
    spec: &TwoWayPenaltySpec,
    free: Axis,
    diagnostics: bool,
) -> Result<ConditionalFit> {
    check_inputs(x.values().shape(), fixed, w, spec, free)?;
    let ne = normal_equations(x.values(), Some(x.mask()), w.as_matrix(), fixed, free);
    let penalty = penalty_for(fixed, spec, free)?;
    let system = ConditionalSystem::new(&ne.diag, &penalty, free)?;
    let estimate = system.solve(&ne.rhs);
    if !diagnostics {
        return Ok(ConditionalFit {
            estimate,
            unpenalized: Vec::new(),
            hat: HatTrace {
                trace: f64::NAN,
                residual_df: f64::NAN,
            },
        });
    }
    let mut unpenalized = Vec::with_capacity(ne.diag.len());
    for (j, (&d, &b)) in ne.diag.iter().zip(&ne.rhs).enumerate() {
        if !(d > 0.0) {
            return Err(Error::DegenerateIndex { axis: free, index: j });
        }
        unpenalized.push(b / d);
    }
    Ok(ConditionalFit {
        estimate,
        unpenalized,
        hat: system.hat_trace(),
    })
}

/// Minimizer over `v` of the penalized weighted criterion for fixed `u`.
pub fn update_v_given_u(
    x: &ObservedMatrix,
    u: &[f64],
    w: &WeightMatrix,
    spec: &TwoWayPenaltySpec,
) -> Result<Vec<f64>> {
    Ok(conditional_fit(x, u, w, spec, Axis::Column, false)?.estimate)
}

/// Minimizer over `u` of the penalized weighted criterion for fixed `v`.
pub fn update_u_given_v(
    x: &ObservedMatrix,
    v: &[f64],
    w: &WeightMatrix,
    spec: &TwoWayPenaltySpec,
) -> Result<Vec<f64>> {
    Ok(conditional_fit(x, v, w, spec, Axis::Row, false)?.estimate)
}

fn hat_trace(fixed: &[f64], w: &WeightMatrix, spec: &TwoWayPenaltySpec, free: Axis) -> Result<HatTrace> {
    check_inputs(w.as_matrix().shape(), fixed, w, spec, free)?;
    let d = weighted_gram(w.as_matrix(), fixed, free);
    let penalty = penalty_for(fixed, spec, free)?;
    Ok(ConditionalSystem::new(&d, &penalty, free)?.hat_trace())
}

/// `tr(H)` for the column update, `H = U (U^T W U + 2 Omega_{v|u})^{-1} U^T W`.
pub fn hat_trace_v(u: &[f64], w: &WeightMatrix, spec: &TwoWayPenaltySpec) -> Result<f64> {
    Ok(hat_trace(u, w, spec, Axis::Column)?.trace)
}

/// `tr(H*)` for the row update.
pub fn hat_trace_u(v: &[f64], w: &WeightMatrix, spec: &TwoWayPenaltySpec) -> Result<f64> {
    Ok(hat_trace(v, w, spec, Axis::Row)?.trace)
}
