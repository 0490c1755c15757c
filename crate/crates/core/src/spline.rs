//! Natural cubic spline interpolation of discrete singular vectors.

use alloc::vec::Vec;

use crate::error::{check_len, contract, Result};
use crate::penalty::{PenaltyKind, RoughnessPenalty};

/// Natural cubic spline, stored as knot values and second derivatives
/// (zero at both ends).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplineFunction {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

/// A spline value, flagged when `t` lies outside the knot range (the spline
/// is then continued linearly).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub extrapolated: bool,
}

/// Minimum-roughness interpolant of `values` at `grid`.
pub fn interpolate(values: &[f64], grid: &[f64]) -> Result<SplineFunction> {
    check_len("spline values", grid.len(), values.len())?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(contract("spline values must be finite"));
    }
    let omega = RoughnessPenalty::new(grid, PenaltyKind::NaturalSpline)?;
    let interior = omega.interior_second_derivatives(values);
    let mut second = Vec::with_capacity(grid.len());
    second.push(0.0);
    second.extend(interior);
    second.push(0.0);
    Ok(SplineFunction {
        knots: grid.to_vec(),
        values: values.to_vec(),
        second,
    })
}

impl SplineFunction {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn knot_values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Interval index `i` with `t` in `[t_i, t_{i+1}]`.
    fn interval(&self, t: f64) -> usize {
        let k = self.knots.len();
        match self.knots.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i.min(k - 2),
            Err(i) => i.saturating_sub(1).min(k - 2),
        }
    }

    fn slope_at_ends(&self) -> (f64, f64) {
        let k = self.knots.len();
        let h0 = self.knots[1] - self.knots[0];
        let left = (self.values[1] - self.values[0]) / h0 - h0 * self.second[1] / 6.0;
        let hn = self.knots[k - 1] - self.knots[k - 2];
        let right = (self.values[k - 1] - self.values[k - 2]) / hn + hn * self.second[k - 2] / 6.0;
        (left, right)
    }

    pub fn evaluate(&self, t: f64) -> Evaluation {
        let (a, b) = self.domain();
        let k = self.knots.len();
        if t < a {
            let (slope, _) = self.slope_at_ends();
            return Evaluation {
                value: self.values[0] + (t - a) * slope,
                extrapolated: true,
            };
        }
        if t > b {
            let (_, slope) = self.slope_at_ends();
            return Evaluation {
                value: self.values[k - 1] + (t - b) * slope,
                extrapolated: true,
            };
        }
        let i = self.interval(t);
        let (tl, tr) = (self.knots[i], self.knots[i + 1]);
        let h = tr - tl;
        let (dl, dr) = (t - tl, tr - t);
        let linear = (dl * self.values[i + 1] + dr * self.values[i]) / h;
        let curv = dl * dr * ((1.0 + dl / h) * self.second[i + 1] + (1.0 + dr / h) * self.second[i]) / 6.0;
        Evaluation {
            value: linear - curv,
            extrapolated: false,
        }
    }

    /// `g''(t)`, piecewise linear and zero outside the knot range.
    pub fn second_derivative(&self, t: f64) -> f64 {
        let (a, b) = self.domain();
        if t < a || t > b {
            return 0.0;
        }
        let i = self.interval(t);
        let (tl, tr) = (self.knots[i], self.knots[i + 1]);
        let h = tr - tl;
        ((t - tl) * self.second[i + 1] + (tr - t) * self.second[i]) / h
    }

    /// `int g''(t)^2 dt`, exact for the piecewise-linear second derivative.
    pub fn roughness(&self) -> f64 {
        self.knots
            .windows(2)
            .zip(self.second.windows(2))
            .map(|(t, g)| (t[1] - t[0]) * (g[0] * g[0] + g[0] * g[1] + g[1] * g[1]) / 3.0)
            .sum()
    }

    /// `(t, g(t))` at `count` equally spaced points over the domain.
    pub fn sample(&self, count: usize) -> Vec<(f64, f64)> {
        let (a, b) = self.domain();
        match count {
            0 => Vec::new(),
            1 => alloc::vec![(a, self.evaluate(a).value)],
            _ => (0..count)
                .map(|i| {
                    let t = if i + 1 == count {
                        b
                    } else {
                        a + (b - a) * i as f64 / (count - 1) as f64
                    };
                    (t, self.evaluate(t).value)
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::unit_grid;

    #[test]
    fn reproduces_knot_values() {
        let grid = [0.0, 0.2, 0.5, 0.6, 1.0];
        let vals = [1.0, -2.0, 0.5, 3.0, 0.0];
        let s = interpolate(&vals, &grid).unwrap();
        for (t, v) in grid.iter().zip(vals) {
            let e = s.evaluate(*t);
            assert!((e.value - v).abs() < 1e-12);
            assert!(!e.extrapolated);
        }
    }

    #[test]
    fn linear_data_is_linear() {
        let grid = unit_grid(6);
        let vals: Vec<f64> = grid.iter().map(|t| 2.0 * t + 1.0).collect();
        let s = interpolate(&vals, &grid).unwrap();
        assert!(s.roughness().abs() < 1e-20);
        for t in [0.13, 0.5, 0.77] {
            assert!((s.evaluate(t).value - (2.0 * t + 1.0)).abs() < 1e-12);
        }
        // midpoint of neighbours
        let mid = 0.5 * (grid[1] + grid[2]);
        assert!((s.evaluate(mid).value - 0.5 * (vals[1] + vals[2])).abs() < 1e-12);
    }

    #[test]
    fn extrapolation_is_linear_and_flagged() {
        let grid = unit_grid(5);
        let vals = [0.0, 1.0, 0.0, 1.0, 0.0];
        let s = interpolate(&vals, &grid).unwrap();
        let e1 = s.evaluate(1.1);
        let e2 = s.evaluate(1.2);
        assert!(e1.extrapolated && e2.extrapolated);
        let slope1 = (e1.value - vals[4]) / 0.1;
        let slope2 = (e2.value - vals[4]) / 0.2;
        assert!((slope1 - slope2).abs() < 1e-10);
    }

    #[test]
    fn duplicate_knots_rejected() {
        assert!(interpolate(&[1.0, 2.0, 3.0], &[0.0, 0.5, 0.5]).is_err());
        assert!(interpolate(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }
}
