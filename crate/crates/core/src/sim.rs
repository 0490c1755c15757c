//! Contaminated two-way functional datasets and estimation-error metrics.
//!
//! The rank-one signal is `s0 u0 v0^T` with `s0 = 773`, `u0` the unit-norm
//! discretization of `10^y` and `v0` that of `sin(2 pi z)` on equally spaced
//! grids over `[0, 1]`. Contamination is applied to the signal, then
//! Gaussian noise is added to every cell. Contamination and noise use
//! separate random streams, so a contaminated draw and its clean twin share
//! the same noise.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_len, contract, Result};
use crate::linalg::dense::{orthonormal_columns, Svd};
use crate::matrix::{dot, norm, unit_grid, Matrix, ObservedMatrix};

/// Leading singular value of the simulated signal.
pub const S0: f64 = 773.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Contamination {
    None,
    OutlyingCells,
    OutlyingRows,
    OutlyingBlock,
    Diagonal,
}

impl Contamination {
    pub const ALL: [Contamination; 5] = [
        Contamination::None,
        Contamination::OutlyingCells,
        Contamination::OutlyingRows,
        Contamination::OutlyingBlock,
        Contamination::Diagonal,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Contamination::None => "none",
            Contamination::OutlyingCells => "outlying_cells",
            Contamination::OutlyingRows => "outlying_rows",
            Contamination::OutlyingBlock => "outlying_block",
            Contamination::Diagonal => "diagonal",
        }
    }
}

impl core::str::FromStr for Contamination {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        Contamination::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| contract(alloc::format!("unknown contamination '{s}'")))
    }
}

/// Sizes of the contamination patterns.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContaminationSizes {
    pub cells: usize,
    pub rows: usize,
    pub block: usize,
}

impl Default for ContaminationSizes {
    fn default() -> Self {
        Self {
            cells: 100,
            rows: 5,
            block: 10,
        }
    }
}

/// Second pair of the rank-two generator: left shape `exp(-decay y)`, right
/// shape `cos(2 pi z)`, each orthogonalized against the first pair, with
/// singular value `ratio * s0`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rank2Config {
    pub ratio: f64,
    pub left_decay: f64,
}

impl Default for Rank2Config {
    fn default() -> Self {
        Self {
            ratio: 0.35,
            left_decay: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimScenario {
    pub rank: usize,
    pub m: usize,
    pub n: usize,
    pub noise_variance: f64,
    pub contamination: Contamination,
    pub sizes: ContaminationSizes,
    pub rank2: Rank2Config,
    pub seed: u64,
    /// Independent random stream (e.g. the replication index).
    pub stream: u64,
}

impl Default for SimScenario {
    fn default() -> Self {
        Self {
            rank: 1,
            m: 100,
            n: 100,
            noise_variance: 1.0,
            contamination: Contamination::None,
            sizes: ContaminationSizes::default(),
            rank2: Rank2Config::default(),
            seed: 0,
            stream: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Truth {
    pub s: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Truth {
    pub fn left_basis(&self) -> Matrix {
        let m = self.u[0].len();
        Matrix::from_fn(m, self.u.len(), |i, k| self.u[k][i])
    }

    pub fn right_basis(&self) -> Matrix {
        let n = self.v[0].len();
        Matrix::from_fn(n, self.v.len(), |j, k| self.v[k][j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub truth: Truth,
    /// Noise-free, uncontaminated signal.
    pub signal: Matrix,
    pub data: ObservedMatrix,
    /// Cells altered by the contamination, row-major sorted.
    pub contaminated_cells: Vec<(usize, usize)>,
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn orthogonalize(v: Vec<f64>, against: &[f64]) -> Vec<f64> {
    let c = dot(&v, against);
    unit(v.iter().zip(against).map(|(a, b)| a - c * b).collect())
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Unit-norm discretized rank-one shapes `(u0, v0)` on `m` and `n` points.
pub fn rank_one_shapes(m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
    let u = unit(unit_grid(m).iter().map(|&y| libm::pow(10.0, y)).collect());
    let v = unit(unit_grid(n).iter().map(|&z| libm::sin(2.0 * PI * z)).collect());
    (u, v)
}

pub fn generate(sc: &SimScenario) -> Result<SimResult> {
    let (m, n) = (sc.m, sc.n);
    if m < 3 || n < 3 {
        return Err(contract("simulation grids need at least 3 points"));
    }
    if !(sc.noise_variance >= 0.0) || !sc.noise_variance.is_finite() {
        return Err(contract("noise variance must be finite and >= 0"));
    }
    if sc.rank != 1 && sc.rank != 2 {
        return Err(contract(alloc::format!("rank must be 1 or 2, got {}", sc.rank)));
    }
    let (u0, v0) = rank_one_shapes(m, n);
    let ygrid = unit_grid(m);
    let zgrid = unit_grid(n);
    let mut truth = Truth {
        s: vec![S0],
        u: vec![u0.clone()],
        v: vec![v0.clone()],
    };
    if sc.rank == 2 {
        let u1 = orthogonalize(ygrid.iter().map(|&y| libm::exp(-sc.rank2.left_decay * y)).collect(), &u0);
        let v1 = orthogonalize(zgrid.iter().map(|&z| libm::cos(2.0 * PI * z)).collect(), &v0);
        truth.s.push(sc.rank2.ratio * S0);
        truth.u.push(u1);
        truth.v.push(v1);
    }
    let mut signal = Matrix::zeros(m, n);
    for k in 0..truth.s.len() {
        signal.add_outer(truth.s[k], &truth.u[k], &truth.v[k]);
    }
    let c1 = signal.max();

    let mut rng = rng_for(sc.seed, 2 * sc.stream);
    let mut x = signal.clone();
    let mut cells = Vec::new();
    match sc.contamination {
        Contamination::None => {}
        Contamination::OutlyingCells => {
            let count = sc.sizes.cells;
            if count > m * n {
                return Err(contract("more outlying cells than matrix cells"));
            }
            for idx in index::sample(&mut rng, m * n, count).into_vec() {
                let (i, j) = (idx / n, idx % n);
                x[(i, j)] = rng.random_range(c1..=2.0 * c1);
                cells.push((i, j));
            }
        }
        Contamination::OutlyingRows => {
            let count = sc.sizes.rows;
            if count > m {
                return Err(contract("more outlying rows than rows"));
            }
            let shape = unit(zgrid.iter().map(|&z| 1.0 + libm::sin(4.0 * PI * z)).collect());
            for i in index::sample(&mut rng, m, count).into_vec() {
                for j in 0..n {
                    x[(i, j)] = S0 * u0[i] * shape[j];
                    cells.push((i, j));
                }
            }
        }
        Contamination::OutlyingBlock => {
            let b = sc.sizes.block;
            if m.min(n) < b {
                return Err(contract(alloc::format!(
                    "outlying block of size {b} does not fit a {m}x{n} grid"
                )));
            }
            let i0 = rng.random_range(0..=m - b);
            let j0 = rng.random_range(0..=n - b);
            let shift = rng.random_range(2.0 * c1..=3.0 * c1);
            for i in i0..i0 + b {
                for j in j0..j0 + b {
                    x[(i, j)] += shift;
                    cells.push((i, j));
                }
            }
        }
        Contamination::Diagonal => {
            for i in 0..m.min(n) {
                x[(i, i)] = rng.random_range(c1..=2.0 * c1);
                cells.push((i, i));
            }
        }
    }
    cells.sort_unstable();

    if sc.noise_variance > 0.0 {
        let mut noise_rng = rng_for(sc.seed, 2 * sc.stream + 1);
        let normal = Normal::new(0.0, libm::sqrt(sc.noise_variance)).map_err(|_| contract("invalid noise variance"))?;
        for val in x.as_mut_slice() {
            *val += normal.sample(&mut noise_rng);
        }
    }

    let data = ObservedMatrix::new(x, vec![true; m * n], ygrid, zgrid)?;
    Ok(SimResult {
        truth,
        signal,
        data,
        contaminated_cells: cells,
    })
}

/// Marks `count` uniformly chosen cells missing.
pub fn mask_random(result: &SimResult, count: usize, seed: u64, stream: u64) -> Result<SimResult> {
    let (m, n) = (result.data.rows(), result.data.cols());
    if count >= m * n {
        return Err(contract("cannot mask every cell"));
    }
    let mut out = result.clone();
    if count == 0 {
        return Ok(out);
    }
    let mut rng = rng_for(seed ^ 0x6d61_736b, stream);
    let mut mask = out.data.mask().to_vec();
    for idx in index::sample(&mut rng, m * n, count).into_vec() {
        mask[idx] = false;
    }
    out.data.set_mask(mask);
    Ok(out)
}

/// Euclidean distance after flipping `est` to agree in sign with `truth`.
pub fn metric_l2(est: &[f64], truth: &[f64]) -> Result<f64> {
    check_len("estimate length", truth.len(), est.len())?;
    let sign = if dot(est, truth) < 0.0 { -1.0 } else { 1.0 };
    Ok(libm::sqrt(
        est.iter().zip(truth).map(|(e, t)| (sign * e - t) * (sign * e - t)).sum(),
    ))
}

pub fn metric_singular_value(est: f64, truth: f64) -> f64 {
    (est - truth).abs()
}

/// Largest principal angle, in degrees, between the column spans of two
/// bases with the same number of columns.
pub fn metric_principal_angle(est: &Matrix, truth: &Matrix) -> Result<f64> {
    check_len("basis rows", truth.rows(), est.rows())?;
    check_len("basis columns", truth.cols(), est.cols())?;
    let qe = orthonormal_columns(est)?;
    let qt = orthonormal_columns(truth)?;
    let cross = qe.transpose().mul(&qt)?;
    let cos = Svd::compute(&cross).s.last().copied().unwrap_or(0.0).min(1.0);
    // sine of the same angle from the component of span(est) outside span(truth)
    let proj = qt.mul(&qt.transpose().mul(&qe)?)?;
    let outside = qe.sub(&proj)?;
    let sin = Svd::compute(&outside).s.first().copied().unwrap_or(0.0).min(1.0);
    Ok(libm::atan2(sin, cos).to_degrees())
}

pub fn metric_frobenius(est: &Matrix, truth: &Matrix) -> Result<f64> {
    Ok(est.sub(truth)?.frobenius_norm())
}
