//! Huber loss, its IRLS weight function, and the MAD scale estimate.

use alloc::vec::Vec;

use crate::error::{contract, Error, Result};
use crate::matrix::ResidualMatrix;

/// Threshold giving 95% efficiency under Gaussian errors.
pub const DEFAULT_THETA: f64 = 1.345;

/// Consistency constant of the normalized MAD.
pub const MAD_CONSTANT: f64 = 0.675;

/// Huber function with threshold `theta`. `theta = +inf` is the squared loss.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Huber {
    theta: f64,
}

impl Huber {
    pub fn new(theta: f64) -> Result<Self> {
        if theta > 0.0 {
            Ok(Self { theta })
        } else {
            Err(contract(alloc::format!("Huber threshold must be positive, got {theta}")))
        }
    }

    pub fn squared() -> Self {
        Self {
            theta: f64::INFINITY,
        }
    }

    #[inline]
    pub fn theta(&self) -> f64 {
        self.theta
    }

    #[inline]
    pub fn rho(&self, x: f64) -> f64 {
        let a = x.abs();
        if a <= self.theta {
            x * x
        } else {
            2.0 * self.theta * a - self.theta * self.theta
        }
    }

    /// `psi(x) = rho'(x)`.
    #[inline]
    pub fn psi(&self, x: f64) -> f64 {
        if x.abs() <= self.theta {
            2.0 * x
        } else {
            2.0 * self.theta * x.signum()
        }
    }

    /// `psi(x) / x`, with the limit value 2 at the origin.
    #[inline]
    pub fn weight(&self, x: f64) -> f64 {
        let a = x.abs();
        if a <= self.theta {
            2.0
        } else {
            2.0 * self.theta / a
        }
    }
}

impl Default for Huber {
    fn default() -> Self {
        Self {
            theta: DEFAULT_THETA,
        }
    }
}

pub fn huber_rho(x: f64, theta: f64) -> Result<f64> {
    Ok(Huber::new(theta)?.rho(x))
}

pub fn huber_weight(x: f64, theta: f64) -> Result<f64> {
    Ok(Huber::new(theta)?.weight(x))
}

/// How the residual scale is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScaleSource {
    Fixed(f64),
    /// MAD of the residuals of a preliminary plain-SVD rank-one fit.
    MadFromSvdResiduals,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RobustLossSpec {
    pub huber: Huber,
    pub scale: ScaleSource,
}

impl RobustLossSpec {
    pub fn new(theta: f64, scale: ScaleSource) -> Result<Self> {
        if let ScaleSource::Fixed(s) = scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(contract(alloc::format!("scale must be positive, got {s}")));
            }
        }
        Ok(Self {
            huber: Huber::new(theta)?,
            scale,
        })
    }

    pub fn theta(&self) -> f64 {
        self.huber.theta()
    }
}

impl Default for RobustLossSpec {
    fn default() -> Self {
        Self {
            huber: Huber::default(),
            scale: ScaleSource::MadFromSvdResiduals,
        }
    }
}

/// Median of a nonempty sample; even counts average the two central values.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `(1 / 0.675) * median(|r_ij|)` over observed, nonzero residuals.
pub fn estimate_scale_mad(r: &ResidualMatrix) -> Result<f64> {
    let mut abs: Vec<f64> = r.observed().filter(|&x| x != 0.0).map(f64::abs).collect();
    if abs.is_empty() {
        return Err(Error::DegenerateResiduals);
    }
    Ok(median(&mut abs) / MAD_CONSTANT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use alloc::vec;

    fn residuals(v: &[f64]) -> ResidualMatrix {
        let m = Matrix::from_row_major(1, v.len(), v.to_vec()).unwrap();
        ResidualMatrix::new(m, vec![true; v.len()]).unwrap()
    }

    #[test]
    fn rho_values() {
        assert_eq!(huber_rho(0.0, 1.345).unwrap(), 0.0);
        assert!((huber_rho(1.345, 1.345).unwrap() - 1.809025).abs() < 1e-12);
        assert!((huber_rho(2.690, 1.345).unwrap() - 5.427075).abs() < 1e-12);
    }

    #[test]
    fn weight_values() {
        assert_eq!(huber_weight(0.0, 1.345).unwrap(), 2.0);
        assert_eq!(huber_weight(1.0, 1.345).unwrap(), 2.0);
        assert!((huber_weight(2.690, 1.345).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_theta_rejected() {
        assert!(huber_rho(1.0, 0.0).is_err());
        assert!(huber_weight(1.0, -2.0).is_err());
        assert!(Huber::new(f64::NAN).is_err());
    }

    #[test]
    fn infinite_theta_is_squared_loss() {
        let h = Huber::squared();
        assert_eq!(h.rho(1e6), 1e12);
        assert_eq!(h.weight(1e6), 2.0);
    }

    #[test]
    fn mad_examples() {
        let s = estimate_scale_mad(&residuals(&[1.0, -1.0, 2.0, -2.0, 3.0])).unwrap();
        assert!((s - 2.0 / 0.675).abs() < 1e-12);
        let s = estimate_scale_mad(&residuals(&[0.0, 0.0, 1.0, -1.0, 3.0])).unwrap();
        assert!((s - 1.0 / 0.675).abs() < 1e-12);
    }

    #[test]
    fn mad_even_count_and_degenerate() {
        let s = estimate_scale_mad(&residuals(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert!((s - 2.5 / 0.675).abs() < 1e-12);
        assert_eq!(
            estimate_scale_mad(&residuals(&[0.0, 0.0])),
            Err(Error::DegenerateResiduals)
        );
    }

    #[test]
    fn mad_ignores_masked_cells() {
        let m = Matrix::from_row_major(1, 3, vec![1.0, 100.0, 3.0]).unwrap();
        let r = ResidualMatrix::new(m, vec![true, false, true]).unwrap();
        assert!((estimate_scale_mad(&r).unwrap() - 2.0 / 0.675).abs() < 1e-12);
    }
}
