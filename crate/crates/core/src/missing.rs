//! Iterative imputation of missing cells around any rank-one fit.

use alloc::vec::Vec;

use crate::decomp::{
    fit_rank_one, fit_rank_one_svd, irls_rank_one, objective, penalties_for, ComponentPair,
    DecompositionOptions, Method, WarmStart,
};
use crate::error::{contract, Error, Result};
use crate::loss::{estimate_scale_mad, Huber, ScaleSource};
use crate::matrix::{residual, Matrix, ObservedMatrix};
use crate::penalty::TwoWayPenaltySpec;

/// How missing cells are filled before the first fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InitialFill {
    #[default]
    RowMean,
    ColumnMean,
}

impl core::str::FromStr for InitialFill {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "row_mean" => Ok(InitialFill::RowMean),
            "column_mean" => Ok(InitialFill::ColumnMean),
            other => Err(contract(alloc::format!("unknown initial fill '{other}' (expected row_mean or column_mean)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImputationOptions {
    pub initial_fill: InitialFill,
    /// Stop when the largest change of an imputed cell falls below
    /// `tol * (max - min of observed values)`.
    pub tol: f64,
    pub max_rounds: usize,
}

impl Default for ImputationOptions {
    fn default() -> Self {
        Self {
            initial_fill: InitialFill::RowMean,
            tol: 1e-6,
            max_rounds: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImputationState {
    /// Observed values with the current imputations in the missing cells.
    pub filled: Matrix,
    pub round: usize,
    /// Largest absolute change of an imputed cell in the last round.
    pub last_change: f64,
    pub converged: bool,
    /// Objective on the observed cells after each round, at the pair's own
    /// smoothing parameters.
    pub objective_trace: Vec<f64>,
}

/// `x` with missing cells set to their row (or column) mean.
pub fn initial_fill(x: &ObservedMatrix, how: InitialFill) -> Result<Matrix> {
    x.check_lines_observed()?;
    let (m, n) = x.values().shape();
    let mut filled = x.values().clone();
    match how {
        InitialFill::RowMean => {
            for i in 0..m {
                let obs: Vec<f64> = (0..n).filter(|&j| x.is_observed(i, j)).map(|j| x.values()[(i, j)]).collect();
                let mean = obs.iter().sum::<f64>() / obs.len() as f64;
                for j in 0..n {
                    if !x.is_observed(i, j) {
                        filled[(i, j)] = mean;
                    }
                }
            }
        }
        InitialFill::ColumnMean => {
            for j in 0..n {
                let obs: Vec<f64> = (0..m).filter(|&i| x.is_observed(i, j)).map(|i| x.values()[(i, j)]).collect();
                let mean = obs.iter().sum::<f64>() / obs.len() as f64;
                for i in 0..m {
                    if !x.is_observed(i, j) {
                        filled[(i, j)] = mean;
                    }
                }
            }
        }
    }
    Ok(filled)
}

fn objective_without_penalty(x: &ObservedMatrix, u: &[f64], v: &[f64]) -> f64 {
    let (m, n) = x.values().shape();
    let mut rss = 0.0;
    for i in 0..m {
        for j in 0..n {
            if x.is_observed(i, j) {
                let r = x.values()[(i, j)] - u[i] * v[j];
                rss += r * r;
            }
        }
    }
    rss
}

/// Rank-one fit of `x` by `method`, alternating fits on the filled matrix
/// with re-imputation of the missing cells by `s u_i v_j`.
///
/// The robust scale is estimated once, from residuals at observed cells of
/// a converged plain-SVD imputation, and held fixed over rounds. That pass
/// does not depend on the initial fill, so neither does the scale. When
/// those residuals are all below the imputation tolerance (an exactly
/// low-rank input) the scale falls back to the SVD of the initial fill.
/// Later rounds start from the previous round's pair.
pub fn fit_with_missing(
    x: &ObservedMatrix,
    method: Method,
    opts: &DecompositionOptions,
) -> Result<(ComponentPair, ImputationState)> {
    if x.is_complete() {
        let pair = fit_rank_one(x, method, opts)?;
        return Ok((
            pair,
            ImputationState {
                filled: x.values().clone(),
                round: 0,
                last_change: 0.0,
                converged: true,
                objective_trace: Vec::new(),
            },
        ));
    }
    x.check_lines_observed()?;
    let io = &opts.imputation;
    if !(io.tol > 0.0) || io.max_rounds == 0 {
        return Err(contract("imputation tolerance must be positive and max_rounds >= 1"));
    }
    let (m, n) = x.values().shape();
    let missing: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| !x.is_observed(i, j))
        .collect();
    let (lo, hi) = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| x.is_observed(i, j))
        .map(|(i, j)| x.values()[(i, j)])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let range = if hi > lo { hi - lo } else { 1.0 };
    let threshold = io.tol * range;

    let mut filled = initial_fill(x, io.initial_fill)?;
    let (huber, sigma) = match method {
        Method::Svd => (Huber::squared(), 1.0),
        Method::Rsvd => (Huber::squared(), 1.0),
        Method::RobRsvd => {
            let sigma = match opts.loss.scale {
                ScaleSource::Fixed(s) => s,
                ScaleSource::MadFromSvdResiduals => {
                    let (pre, _) = fit_with_missing(x, Method::Svd, opts)?;
                    match estimate_scale_mad(&residual(x, pre.s, &pre.u, &pre.v)?) {
                        Ok(sigma) if sigma > threshold => sigma,
                        Ok(_) | Err(Error::DegenerateResiduals) => {
                            // residuals below the imputation resolution carry no
                            // scale; use the preliminary fit on the initial fill
                            let first = fit_rank_one_svd(&ObservedMatrix::unmasked(filled.clone(), x))?;
                            estimate_scale_mad(&residual(x, first.s, &first.u, &first.v)?)?
                        }
                        Err(e) => return Err(e),
                    }
                }
            };
            (opts.loss.huber, sigma)
        }
    };

    let penalties = match method {
        Method::Svd => None,
        Method::Rsvd | Method::RobRsvd => Some(penalties_for(x, opts.irls.penalty_kind)?),
    };
    let mut objective_trace = Vec::new();
    let mut prev: Option<ComponentPair> = None;
    let mut last_change = f64::INFINITY;
    let mut round = 0;
    let mut converged = false;
    while round < io.max_rounds {
        round += 1;
        let current = ObservedMatrix::unmasked(filled.clone(), x);
        let pair = match method {
            Method::Svd => fit_rank_one_svd(&current)?,
            Method::Rsvd | Method::RobRsvd => irls_rank_one(
                &current,
                huber,
                sigma,
                &opts.grid,
                &opts.irls,
                prev.as_ref().map(WarmStart::from),
            )?,
        };
        last_change = 0.0;
        for &(i, j) in &missing {
            let new = pair.s * pair.u[i] * pair.v[j];
            last_change = f64::max(last_change, (new - filled[(i, j)]).abs());
            filled[(i, j)] = new;
        }
        let scaled: Vec<f64> = pair.v.iter().map(|a| a * pair.s).collect();
        objective_trace.push(match &penalties {
            None => objective_without_penalty(x, &pair.u, &scaled),
            Some((ou, ov)) => {
                let spec = TwoWayPenaltySpec::new(ou.clone(), ov.clone(), pair.lambda_u, pair.lambda_v)?;
                objective(x, &pair.u, &scaled, huber, sigma, &spec)?
            }
        });
        prev = Some(pair);
        if last_change < threshold {
            converged = true;
            break;
        }
    }
    let mut pair = prev.expect("at least one round");
    pair.converged = pair.converged && converged;
    Ok((
        pair,
        ImputationState {
            filled,
            round,
            last_change,
            converged,
            objective_trace,
        },
    ))
}
