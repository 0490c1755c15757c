//! Dense matrices, the observed-data model, and residual/weight matrices.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{check_len, contract, Axis, Error, Result};

/// Dense row-major `rows x cols` matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("matrix data length", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// `s * u * v^T`.
    pub fn outer(s: f64, u: &[f64], v: &[f64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| s * u[i] * v[j])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        check_len("inner dimension", self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("vector length", self.cols, x.len())?;
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn tr_mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("vector length", self.rows, x.len())?;
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        Ok(out)
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(x, &self.mul_vec(x)?))
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        check_len("rows", self.rows, other.rows)?;
        check_len("cols", self.cols, other.cols)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add_outer(&mut self, s: f64, u: &[f64], v: &[f64]) {
        for (i, &ui) in u.iter().enumerate() {
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (x, &vj) in row.iter_mut().zip(v) {
                *x += s * ui * vj;
            }
        }
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|x| x * x).sum::<f64>())
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| {
                (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol * (1.0 + self[(i, j)].abs()))
            })
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `k` equally spaced points on `[0, 1]`.
pub fn unit_grid(k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..k).map(|i| i as f64 / (k - 1) as f64).collect(),
    }
}

pub(crate) fn check_grid(grid: &[f64], what: &'static str) -> Result<()> {
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(contract(alloc::format!("{what} contains non-finite values")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(contract(alloc::format!("{what} is not strictly increasing")));
    }
    Ok(())
}

/// A two-way functional data matrix: values sampled on a row grid and a
/// column grid, with a mask of observed cells.
///
/// Cells with `mask == false` keep a stored placeholder of 0 and never
/// enter a loss, weight or residual computation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObservedMatrix {
    values: Matrix,
    mask: Vec<bool>,
    row_grid: Vec<f64>,
    col_grid: Vec<f64>,
}

impl ObservedMatrix {
    pub fn new(
        values: Matrix,
        mask: Vec<bool>,
        row_grid: Vec<f64>,
        col_grid: Vec<f64>,
    ) -> Result<Self> {
        let (m, n) = values.shape();
        if m < 2 || n < 2 {
            return Err(contract(alloc::format!(
                "matrix must be at least 2x2, got {m}x{n}"
            )));
        }
        check_len("mask length", m * n, mask.len())?;
        check_len("row grid length", m, row_grid.len())?;
        check_len("column grid length", n, col_grid.len())?;
        check_grid(&row_grid, "row grid")?;
        check_grid(&col_grid, "column grid")?;
        let mut values = values;
        for (x, &obs) in values.data.iter_mut().zip(&mask) {
            if !obs {
                *x = 0.0;
            } else if !x.is_finite() {
                return Err(contract("observed values must be finite"));
            }
        }
        Ok(Self {
            values,
            mask,
            row_grid,
            col_grid,
        })
    }

    /// Fully observed matrix on equally spaced `[0, 1]` grids.
    pub fn complete(values: Matrix) -> Result<Self> {
        let (m, n) = values.shape();
        Self::new(values, vec![true; m * n], unit_grid(m), unit_grid(n))
    }

    /// Matrix on default grids with the given mask.
    pub fn with_mask(values: Matrix, mask: Vec<bool>) -> Result<Self> {
        let (m, n) = values.shape();
        Self::new(values, mask, unit_grid(m), unit_grid(n))
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn row_grid(&self) -> &[f64] {
        &self.row_grid
    }

    pub fn col_grid(&self) -> &[f64] {
        &self.col_grid
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.values.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.values.cols
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.values.cols + j]
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&b| b)
    }

    /// Same grids and mask, new values (masked cells are reset to 0).
    pub fn with_values(&self, values: Matrix) -> Result<Self> {
        Self::new(
            values,
            self.mask.clone(),
            self.row_grid.clone(),
            self.col_grid.clone(),
        )
    }

    /// Same values and grids, every cell marked observed.
    pub(crate) fn unmasked(values: Matrix, like: &ObservedMatrix) -> Self {
        let len = values.as_slice().len();
        Self {
            values,
            mask: vec![true; len],
            row_grid: like.row_grid.clone(),
            col_grid: like.col_grid.clone(),
        }
    }

    pub(crate) fn set_mask(&mut self, mask: Vec<bool>) {
        for (x, &obs) in self.values.data.iter_mut().zip(&mask) {
            if !obs {
                *x = 0.0;
            }
        }
        self.mask = mask;
    }

    /// Fails if some row or column has no observed cell.
    pub fn check_lines_observed(&self) -> Result<()> {
        let (m, n) = self.values.shape();
        for i in 0..m {
            if !(0..n).any(|j| self.is_observed(i, j)) {
                return Err(Error::EmptyLine {
                    axis: Axis::Row,
                    index: i,
                });
            }
        }
        for j in 0..n {
            if !(0..m).any(|i| self.is_observed(i, j)) {
                return Err(Error::EmptyLine {
                    axis: Axis::Column,
                    index: j,
                });
            }
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let (m, n) = self.values.shape();
        let mask = (0..n)
            .flat_map(|j| (0..m).map(move |i| (i, j)))
            .map(|(i, j)| self.mask[i * n + j])
            .collect();
        Self {
            values: self.values.transpose(),
            mask,
            row_grid: self.col_grid.clone(),
            col_grid: self.row_grid.clone(),
        }
    }
}

/// IRLS weights, one per cell. Masked cells carry weight 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(Matrix);

impl WeightMatrix {
    pub fn new(weights: Matrix) -> Result<Self> {
        if weights.as_slice().iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(contract("weights must be finite and nonnegative"));
        }
        Ok(Self(weights))
    }

    /// Weight 2 on every observed cell (the squared-loss weights).
    pub fn squared_loss(x: &ObservedMatrix) -> Self {
        let (m, n) = x.values().shape();
        Self(Matrix::from_fn(m, n, |i, j| {
            if x.is_observed(i, j) {
                2.0
            } else {
                0.0
            }
        }))
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }
}

/// `X - s u v^T` on observed cells; masked cells hold 0 and stay excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    residuals: Matrix,
    mask: Vec<bool>,
}

impl ResidualMatrix {
    pub fn new(residuals: Matrix, mask: Vec<bool>) -> Result<Self> {
        check_len("mask length", residuals.as_slice().len(), mask.len())?;
        let mut residuals = residuals;
        for (r, &obs) in residuals.data.iter_mut().zip(&mask) {
            if !obs {
                *r = 0.0;
            }
        }
        Ok(Self { residuals, mask })
    }

    pub fn residuals(&self) -> &Matrix {
        &self.residuals
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Residuals at observed cells, in row-major order.
    pub fn observed(&self) -> impl Iterator<Item = f64> + '_ {
        self.residuals
            .data
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .map(|(&r, _)| r)
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.observed().map(|r| r * r).sum::<f64>())
    }
}

/// Residual of the rank-one fit `s u v^T` on the observed cells of `x`.
pub fn residual(x: &ObservedMatrix, s: f64, u: &[f64], v: &[f64]) -> Result<ResidualMatrix> {
    let (m, n) = x.values().shape();
    check_len("u length", m, u.len())?;
    check_len("v length", n, v.len())?;
    if !s.is_finite() {
        return Err(contract("singular value must be finite"));
    }
    let r = Matrix::from_fn(m, n, |i, j| {
        if x.is_observed(i, j) {
            x.values()[(i, j)] - s * u[i] * v[j]
        } else {
            0.0
        }
    });
    Ok(ResidualMatrix {
        residuals: r,
        mask: x.mask().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ObservedMatrix {
        let values = Matrix::from_row_major(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        ObservedMatrix::with_mask(values, vec![true, true, false, true, true, true]).unwrap()
    }

    #[test]
    fn exact_fit_has_zero_residual() {
        let u = [1.0, 2.0, 3.0];
        let v = [0.5, -1.0];
        let x = ObservedMatrix::complete(Matrix::outer(1.0, &u, &v)).unwrap();
        let r = residual(&x, 1.0, &u, &v).unwrap();
        assert!(r.observed().all(|r| r == 0.0));
    }

    #[test]
    fn zero_fit_returns_values() {
        let x = sample();
        let r = residual(&x, 0.0, &[1.0; 3], &[1.0; 2]).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                if x.is_observed(i, j) {
                    assert_eq!(r.residuals()[(i, j)], x.values()[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn masked_cell_excluded() {
        let x = sample();
        let u = [0.3, -0.7, 1.1];
        let v = [2.0, -0.4];
        let s = 1.7;
        let r = residual(&x, s, &u, &v).unwrap();
        assert_eq!(r.residuals()[(1, 0)], 0.0);
        assert_eq!(r.observed().count(), 5);
        // elementwise oracle
        let raw = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut expect = alloc::vec::Vec::new();
        for i in 0..3 {
            for j in 0..2 {
                if !(i == 1 && j == 0) {
                    expect.push(raw[i * 2 + j] - s * u[i] * v[j]);
                }
            }
        }
        let got: alloc::vec::Vec<f64> = r.observed().collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let x = sample();
        assert!(matches!(
            residual(&x, 1.0, &[1.0; 2], &[1.0; 2]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn construction_checks() {
        let v = Matrix::zeros(1, 3);
        assert!(ObservedMatrix::complete(v).is_err());
        let v = Matrix::zeros(2, 2);
        assert!(ObservedMatrix::new(v, vec![true; 4], vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn masked_placeholder_is_zero() {
        let values = Matrix::from_row_major(2, 2, vec![1.0, f64::NAN, 3.0, 4.0]).unwrap();
        let x = ObservedMatrix::with_mask(values, vec![true, false, true, true]).unwrap();
        assert_eq!(x.values()[(0, 1)], 0.0);
    }
}
