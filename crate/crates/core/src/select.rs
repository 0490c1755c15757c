//! GCV criteria for the smoothing parameters and grid search.

use alloc::vec::Vec;

use crate::decomp::update::{conditional_fit, ConditionalFit};
use crate::error::{contract, Axis, Error, Result};
use crate::matrix::{ObservedMatrix, WeightMatrix};
use crate::penalty::TwoWayPenaltySpec;

/// Strictly increasing, finite, nonnegative smoothing parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LambdaGrid(Vec<f64>);

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(contract("lambda grid is empty"));
        }
        if values.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(contract("lambda grid values must be finite and >= 0"));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(contract("lambda grid must be strictly increasing"));
        }
        Ok(Self(values))
    }

    /// `count` log-spaced points on `[min, max]`.
    pub fn log_spaced(min: f64, max: f64, count: usize) -> Result<Self> {
        if !(min > 0.0 && max >= min) || count == 0 {
            return Err(contract(alloc::format!(
                "log grid needs 0 < min <= max and count >= 1 (got {min}, {max}, {count})"
            )));
        }
        if count == 1 {
            return Self::new(alloc::vec![min]);
        }
        let (a, b) = (libm::log10(min), libm::log10(max));
        let values = (0..count)
            .map(|i| libm::pow(10.0, a + (b - a) * i as f64 / (count - 1) as f64))
            .collect();
        Self::new(values)
    }

    pub fn single(lambda: f64) -> Result<Self> {
        Self::new(alloc::vec![lambda])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.0[0]
    }
}

impl Default for LambdaGrid {
    /// 20 points log-spaced over `[1e-6, 1e4]`.
    fn default() -> Self {
        Self::log_spaced(1e-6, 1e4, 20).expect("valid default grid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GcvRecord {
    pub lambda: f64,
    pub gcv: f64,
    pub hat_trace: f64,
    pub chosen: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GcvTrace {
    pub records: Vec<GcvRecord>,
}

impl GcvTrace {
    pub fn chosen(&self) -> Option<&GcvRecord> {
        self.records.iter().find(|r| r.chosen)
    }
}

/// One GCV evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcvEval {
    pub gcv: f64,
    pub hat_trace: f64,
}

/// Grid search: evaluates `score` at every grid point and returns the
/// minimizer (ties go to the smaller lambda). A one-point grid selects its
/// point whatever the score.
pub fn select_lambda<F>(grid: &LambdaGrid, mut score: F) -> Result<(f64, GcvTrace)>
where
    F: FnMut(f64) -> Result<GcvEval>,
{
    let mut records = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64)> = None;
    for (k, &lambda) in grid.values().iter().enumerate() {
        let eval = score(lambda)?;
        records.push(GcvRecord {
            lambda,
            gcv: eval.gcv,
            hat_trace: eval.hat_trace,
            chosen: false,
        });
        if eval.gcv.is_finite() && best.map_or(true, |(_, b)| eval.gcv < b) {
            best = Some((k, eval.gcv));
        }
    }
    let idx = match best {
        Some((k, _)) => k,
        None if grid.len() == 1 => 0,
        None => return Err(Error::GcvDegenerate),
    };
    records[idx].chosen = true;
    Ok((grid.values()[idx], GcvTrace { records }))
}

fn gcv_from(fit: &ConditionalFit) -> GcvEval {
    let dim = fit.estimate.len() as f64;
    let hat = fit.hat;
    let numerator: f64 = fit
        .estimate
        .iter()
        .zip(&fit.unpenalized)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / dim;
    let denom = hat.residual_df / dim;
    let gcv = if denom > 1e-14 {
        numerator / (denom * denom)
    } else {
        f64::INFINITY
    };
    GcvEval {
        gcv,
        hat_trace: hat.trace,
    }
}

/// `GCV(lambda_v | lambda_u)` at the smoothing parameters in `spec`.
pub fn gcv_v(x: &ObservedMatrix, u: &[f64], w: &WeightMatrix, spec: &TwoWayPenaltySpec) -> Result<GcvEval> {
    let fit = conditional_fit(x, u, w, spec, Axis::Column, true)?;
    Ok(gcv_from(&fit))
}

/// `GCV(lambda_u | lambda_v)` at the smoothing parameters in `spec`.
pub fn gcv_u(x: &ObservedMatrix, v: &[f64], w: &WeightMatrix, spec: &TwoWayPenaltySpec) -> Result<GcvEval> {
    let fit = conditional_fit(x, v, w, spec, Axis::Row, true)?;
    Ok(gcv_from(&fit))
}

/// Select `lambda_v` on `grid` for fixed `u`, weights and `lambda_u`.
pub fn select_lambda_v(
    x: &ObservedMatrix,
    u: &[f64],
    w: &WeightMatrix,
    spec: &TwoWayPenaltySpec,
    grid: &LambdaGrid,
) -> Result<(f64, GcvTrace)> {
    select_lambda(grid, |lv| gcv_v(x, u, w, &spec.with_lambdas(spec.lambda_u, lv)?))
}

/// Select `lambda_u` on `grid` for fixed `v`, weights and `lambda_v`.
pub fn select_lambda_u(
    x: &ObservedMatrix,
    v: &[f64],
    w: &WeightMatrix,
    spec: &TwoWayPenaltySpec,
    grid: &LambdaGrid,
) -> Result<(f64, GcvTrace)> {
    select_lambda(grid, |lu| gcv_u(x, v, w, &spec.with_lambdas(lu, spec.lambda_v)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(grid: &[f64], s: &[f64]) -> Result<(f64, GcvTrace)> {
        let g = LambdaGrid::new(grid.to_vec()).unwrap();
        select_lambda(&g, |l| {
            let k = grid.iter().position(|&x| x == l).unwrap();
            Ok(GcvEval {
                gcv: s[k],
                hat_trace: 0.0,
            })
        })
    }

    #[test]
    fn argmin_and_ties() {
        assert_eq!(scores(&[0.1, 1.0, 10.0], &[3.0, 1.0, 2.0]).unwrap().0, 1.0);
        assert_eq!(scores(&[0.1, 1.0, 10.0], &[1.0, 1.0, 5.0]).unwrap().0, 0.1);
        let (_, trace) = scores(&[0.1, 1.0, 10.0], &[1.0, 1.0, 5.0]).unwrap();
        assert_eq!(trace.records.iter().filter(|r| r.chosen).count(), 1);
    }

    #[test]
    fn degenerate_grid() {
        assert_eq!(
            scores(&[0.1, 1.0], &[f64::INFINITY, f64::NAN]).unwrap_err(),
            Error::GcvDegenerate
        );
        assert_eq!(scores(&[0.5], &[f64::INFINITY]).unwrap().0, 0.5);
    }

    #[test]
    fn quadratic_in_log_lambda() {
        // continuous argmin at log10 lambda = 0.37
        let grid = LambdaGrid::log_spaced(1e-3, 1e3, 25).unwrap();
        let (l, _) = select_lambda(&grid, |l| {
            let t = libm::log10(l) - 0.37;
            Ok(GcvEval {
                gcv: 1.0 + t * t,
                hat_trace: 0.0,
            })
        })
        .unwrap();
        let step = 6.0 / 24.0;
        assert!((libm::log10(l) - 0.37).abs() <= step);
    }

    #[test]
    fn grid_validation() {
        assert!(LambdaGrid::new(alloc::vec![]).is_err());
        assert!(LambdaGrid::new(alloc::vec![1.0, 1.0]).is_err());
        assert!(LambdaGrid::new(alloc::vec![-1.0]).is_err());
        let d = LambdaGrid::default();
        assert_eq!(d.len(), 20);
        assert!((d.values()[0] - 1e-6).abs() < 1e-18);
        assert!((d.values()[19] - 1e4).abs() < 1e-8);
    }
}
