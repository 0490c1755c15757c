//! Variance-stabilizing log transform and singular-value energy shares.

use alloc::vec::Vec;

use crate::error::{contract, Error, Result};
use crate::linalg::dense::Svd;
use crate::matrix::{Matrix, ObservedMatrix};

/// Maps observed cells `x -> log2(x + 1/2)`; masked cells keep their
/// placeholder.
pub fn log_transform(x: &ObservedMatrix) -> Result<ObservedMatrix> {
    let (m, n) = x.values().shape();
    let mut out = x.values().clone();
    for i in 0..m {
        for j in 0..n {
            if !x.is_observed(i, j) {
                continue;
            }
            let value = x.values()[(i, j)];
            if !(value >= 0.0) {
                return Err(Error::NegativeValue { row: i, col: j, value });
            }
            out[(i, j)] = libm::log2(value + 0.5);
        }
    }
    x.with_values(out)
}

/// `100 s_i^2 / ||X||_F^2` for the `k` leading singular values.
pub fn energy_percentages(x: &Matrix, k: usize) -> Result<Vec<f64>> {
    let (m, n) = x.shape();
    if k > m.min(n) {
        return Err(contract(alloc::format!("k = {k} exceeds min(m, n) = {}", m.min(n))));
    }
    let total = x.as_slice().iter().map(|a| a * a).sum::<f64>();
    if total == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let svd = Svd::compute(x);
    Ok(svd.s.iter().take(k).map(|s| 100.0 * s * s / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn log_examples() {
        let x = ObservedMatrix::with_mask(
            Matrix::from_row_major(2, 2, vec![0.0, 0.5, 3.5, 0.0]).unwrap(),
            vec![true, true, true, false],
        )
        .unwrap();
        let y = log_transform(&x).unwrap();
        assert_eq!(y.values().as_slice()[..3], [-1.0, 0.0, 2.0]);
        assert_eq!(y.mask(), x.mask());
        let bad = ObservedMatrix::complete(Matrix::from_row_major(2, 2, vec![1.0, 1.0, -0.1, 1.0]).unwrap()).unwrap();
        assert_eq!(
            log_transform(&bad),
            Err(Error::NegativeValue {
                row: 1,
                col: 0,
                value: -0.1
            })
        );
    }

    #[test]
    fn energy_examples() {
        let d = Matrix::from_diagonal(&[3.0, 4.0]);
        let e = energy_percentages(&d, 2).unwrap();
        assert!((e[0] - 64.0).abs() < 1e-12 && (e[1] - 36.0).abs() < 1e-12);
        let r1 = Matrix::outer(2.0, &[1.0, 2.0, 3.0], &[1.0, -1.0]);
        assert!((energy_percentages(&r1, 1).unwrap()[0] - 100.0).abs() < 1e-10);
        assert_eq!(energy_percentages(&Matrix::zeros(2, 2), 1), Err(Error::ZeroMatrix));
        assert!(energy_percentages(&d, 3).is_err());
    }
}
