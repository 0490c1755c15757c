mod common;

use common::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use robrsvd_core::decomp::{irls_rank_one, robust_weights, WarmStart};
use robrsvd_core::matrix::{norm, unit_grid};
use robrsvd_core::sim::{metric_l2, metric_principal_angle};
use robrsvd_core::*;

fn infinite_theta() -> RobustLossSpec {
    RobustLossSpec::new(f64::INFINITY, ScaleSource::Fixed(1.0)).unwrap()
}

fn aligned(a: &[f64], b: &[f64]) -> f64 {
    metric_l2(a, b).unwrap()
}

fn smooth_rank_one(m: usize, n: usize, noise: f64, seed: u64) -> (ObservedMatrix, Vec<f64>, Vec<f64>) {
    let u: Vec<f64> = unit_grid(m).iter().map(|y| 1.0 + y * y).collect();
    let v: Vec<f64> = unit_grid(n).iter().map(|z| (3.0 * z).sin() + 0.2).collect();
    let mut r = rng(seed);
    let normal = Normal::new(0.0, noise).unwrap();
    let vals = Matrix::from_fn(m, n, |i, j| u[i] * v[j] + normal.sample(&mut r));
    let (nu, nv) = (norm(&u), norm(&v));
    (
        ObservedMatrix::complete(vals).unwrap(),
        u.iter().map(|a| a / nu).collect(),
        v.iter().map(|a| a / nv).collect(),
    )
}

fn random_matrix(m: usize, n: usize, seed: u64) -> ObservedMatrix {
    let mut r = rng(seed);
    ObservedMatrix::complete(Matrix::from_fn(m, n, |_, _| r.random_range(-1.0..1.0))).unwrap()
}

#[test]
fn constant_weights_without_penalty_project_columns() {
    let x = random_matrix(5, 4, 1);
    let u = [0.5, -1.0, 0.3, 2.0, 1.2];
    let w = WeightMatrix::squared_loss(&x);
    let spec = TwoWayPenaltySpec::natural_spline(x.row_grid(), x.col_grid(), 0.0, 0.0).unwrap();
    let got = update_v_given_u(&x, &u, &w, &spec).unwrap();
    let uu: f64 = u.iter().map(|a| a * a).sum();
    let want: Vec<f64> = x.values().tr_mul_vec(&u).unwrap().iter().map(|a| a / uu).collect();
    assert!(rel_err(&got, &want) < 1e-14);
    let v = [1.0, 2.0, -1.0, 0.5];
    let got = update_u_given_v(&x, &v, &w, &spec).unwrap();
    let vv: f64 = v.iter().map(|a| a * a).sum();
    let want: Vec<f64> = x.values().mul_vec(&v).unwrap().iter().map(|a| a / vv).collect();
    assert!(rel_err(&got, &want) < 1e-14);
}

#[test]
fn zero_weight_column_without_penalty_is_reported() {
    let x = ObservedMatrix::with_mask(Matrix::from_fn(3, 3, |i, j| (i + j) as f64), vec![true; 9]).unwrap();
    let mut w = Matrix::from_fn(3, 3, |_, _| 2.0);
    for i in 0..3 {
        w[(i, 1)] = 0.0;
    }
    let w = WeightMatrix::new(w).unwrap();
    let spec = TwoWayPenaltySpec::natural_spline(x.row_grid(), x.col_grid(), 0.0, 0.0).unwrap();
    let err = update_v_given_u(&x, &[1.0, 1.0, 1.0], &w, &spec).unwrap_err();
    assert_eq!(err, Error::DegenerateIndex { axis: Axis::Column, index: 1 });
}

#[test]
fn hat_trace_without_penalty_is_dimension() {
    let c = random_case(9, 100);
    let spec = c.spec.with_lambdas(0.0, 0.0).unwrap();
    let tr = hat_trace_v(&c.u, &c.w, &spec).unwrap();
    assert!((tr - c.x.cols() as f64).abs() < 1e-10);
    let tr = hat_trace_u(&c.v, &c.w, &spec).unwrap();
    assert!((tr - c.x.rows() as f64).abs() < 1e-10);
}

#[test]
fn gcv_without_penalty_is_the_infinite_sentinel() {
    let c = random_case(10, 100);
    let spec = c.spec.with_lambdas(0.0, 0.0).unwrap();
    assert_eq!(gcv_v(&c.x, &c.u, &c.w, &spec).unwrap().gcv, f64::INFINITY);
    assert_eq!(gcv_u(&c.x, &c.v, &c.w, &spec).unwrap().gcv, f64::INFINITY);
}

#[test]
fn exact_rank_one_recovered_with_squared_loss_and_no_penalty() {
    let u = [1.0, 2.0, -1.0, 0.5, 3.0, 1.5];
    let v = [0.2, -0.4, 1.0, 2.0, 0.7];
    let x = ObservedMatrix::complete(Matrix::outer(1.0, &u, &v)).unwrap();
    let grid = PenaltyGrid::fixed(0.0, 0.0).unwrap();
    let pair = fit_rank_one_robrsvd(&x, &infinite_theta(), &grid, &IrlsOptions::default()).unwrap();
    let (nu, nv) = (norm(&u), norm(&v));
    assert!((pair.s - nu * nv).abs() < 1e-8 * nu * nv);
    assert!(aligned(&pair.u, &u.map(|a| a / nu)) < 1e-8);
    assert!(aligned(&pair.v, &v.map(|a| a / nv)) < 1e-8);
    assert!((norm(&pair.u) - 1.0).abs() < 1e-12 && (norm(&pair.v) - 1.0).abs() < 1e-12);
}

#[test]
fn reduction_chain() {
    for seed in 0..10 {
        let x = random_matrix(10, 8, 100 + seed);
        let opts = IrlsOptions::default();
        let grid = PenaltyGrid::default();
        let rob = fit_rank_one_robrsvd(&x, &infinite_theta(), &grid, &opts).unwrap();
        let rsvd = fit_rank_one_rsvd(&x, &grid, &opts).unwrap();
        assert!((rob.s - rsvd.s).abs() < 1e-10 * rsvd.s);
        assert!(aligned(&rob.u, &rsvd.u) < 1e-10 && aligned(&rob.v, &rsvd.v) < 1e-10);

        let zero = PenaltyGrid::fixed(0.0, 0.0).unwrap();
        let rsvd0 = fit_rank_one_rsvd(&x, &zero, &IrlsOptions { tol: 1e-14, max_iter: 5000, ..opts.clone() }).unwrap();
        let svd = fit_rank_one_svd(&x).unwrap();
        assert!((rsvd0.s - svd.s).abs() < 1e-8 * svd.s, "seed {seed}");
        assert!(aligned(&rsvd0.u, &svd.u) < 1e-6 && aligned(&rsvd0.v, &svd.v) < 1e-6, "seed {seed}");
    }
}

#[test]
fn robust_fit_beats_rsvd_with_contaminated_cells() {
    let (mut x, u0, _) = smooth_rank_one(20, 15, 0.2, 5);
    let mut vals = x.values().clone();
    let big = 10.0 * vals.max();
    let mut r = rng(6);
    for _ in 0..5 {
        let (i, j) = (r.random_range(0..20), r.random_range(0..15));
        vals[(i, j)] = big;
    }
    x = x.with_values(vals).unwrap();
    let opts = DecompositionOptions::default();
    let rob = fit_rank_one(&x, Method::RobRsvd, &opts).unwrap();
    let rsvd = fit_rank_one(&x, Method::Rsvd, &opts).unwrap();
    assert!(aligned(&rob.u, &u0) < aligned(&rsvd.u, &u0));
}

#[test]
fn gcv_smoothing_reduces_roughness() {
    let (x, _, _) = smooth_rank_one(30, 25, 0.3, 2);
    let rsvd = fit_rank_one(&x, Method::Rsvd, &DecompositionOptions::default()).unwrap();
    let svd = fit_rank_one_svd(&x).unwrap();
    let omega = build_roughness_penalty(x.col_grid()).unwrap();
    assert!(omega.quad_form(&rsvd.v).unwrap() <= omega.quad_form(&svd.v).unwrap());
    assert!(rsvd.lambda_v > 0.0);
}

#[test]
fn constant_matrix_gives_constant_vectors() {
    let x = ObservedMatrix::complete(Matrix::from_fn(6, 5, |_, _| 2.5)).unwrap();
    let pair = fit_rank_one(&x, Method::Rsvd, &DecompositionOptions::default()).unwrap();
    let (cu, cv) = (1.0 / 6f64.sqrt(), 1.0 / 5f64.sqrt());
    assert!(pair.u.iter().all(|a| (a - cu).abs() < 1e-10));
    assert!(pair.v.iter().all(|a| (a - cv).abs() < 1e-10));
    let (ou, ov) = (build_roughness_penalty(x.row_grid()).unwrap(), build_roughness_penalty(x.col_grid()).unwrap());
    assert!(ou.quad_form(&pair.u).unwrap().abs() < 1e-12 && ov.quad_form(&pair.v).unwrap().abs() < 1e-12);
}

#[test]
fn svd_of_diagonal() {
    let x = ObservedMatrix::complete(Matrix::from_diagonal(&[3.0, 1.0])).unwrap();
    let pair = fit_rank_one_svd(&x).unwrap();
    assert!((pair.s - 3.0).abs() < 1e-14);
    assert!(aligned(&pair.u, &[1.0, 0.0]) < 1e-14 && aligned(&pair.v, &[1.0, 0.0]) < 1e-14);
    assert!(pair.v[0] > 0.0);
}

#[test]
fn rank_two_svd_deflation() {
    let a = [1.0, 1.0, 1.0, 1.0].map(|x: f64| x / 2.0);
    let c = [1.0, -1.0, 1.0, -1.0].map(|x: f64| x / 2.0);
    let b = [1.0, 0.0, 0.0];
    let d = [0.0, 0.6, 0.8];
    let mut vals = Matrix::outer(5.0, &a, &b);
    vals.add_outer(2.0, &c, &d);
    let x = ObservedMatrix::complete(vals).unwrap();
    let dec = fit(&x, Method::Svd, 2, &DecompositionOptions::default()).unwrap();
    assert!((dec.components[0].s - 5.0).abs() < 1e-12 && (dec.components[1].s - 2.0).abs() < 1e-12);
    assert!(aligned(&dec.components[1].u, &c) < 1e-12 && aligned(&dec.components[1].v, &d) < 1e-12);
}

#[test]
fn full_rank_deflation_leaves_nothing() {
    let x = random_matrix(7, 5, 3);
    let dec = fit(&x, Method::Svd, 5, &DecompositionOptions::default()).unwrap();
    assert!(dec.residual.frobenius_norm() < 1e-8 * x.values().frobenius_norm());
    assert!(fit(&x, Method::Svd, 6, &DecompositionOptions::default()).is_err());
    assert!(fit(&x, Method::Svd, 0, &DecompositionOptions::default()).is_err());
}

#[test]
fn deflated_pairs_match_joint_svd() {
    let mut r = rng(14);
    let s = [10.0, 6.0, 3.0];
    let basis = |m: usize, r: &mut rand_chacha::ChaCha8Rng| {
        let a = Matrix::from_fn(m, 3, |_, _| r.random_range(-1.0..1.0));
        robrsvd_core::linalg::dense::orthonormal_columns(&a).unwrap()
    };
    let (qu, qv) = (basis(9, &mut r), basis(7, &mut r));
    let mut vals = Matrix::zeros(9, 7);
    for k in 0..3 {
        vals.add_outer(s[k], &qu.column(k), &qv.column(k));
    }
    for x in vals.as_mut_slice() {
        *x += 0.01 * r.random_range(-1.0..1.0);
    }
    let joint = robrsvd_core::linalg::dense::Svd::compute(&vals);
    let dec = fit(&ObservedMatrix::complete(vals).unwrap(), Method::Svd, 3, &Default::default()).unwrap();
    for k in 0..3 {
        assert!((dec.components[k].s - joint.s[k]).abs() < 1e-10 * joint.s[0]);
        assert!(aligned(&dec.components[k].u, &joint.left(k)) < 1e-8);
        assert!(aligned(&dec.components[k].v, &joint.right(k)) < 1e-8);
    }
}

#[test]
fn rank_two_robust_subspace_beats_svd_under_outlying_rows() {
    use robrsvd_core::sim::{generate, Contamination, SimScenario};
    let sc = SimScenario {
        rank: 2,
        m: 30,
        n: 30,
        contamination: Contamination::OutlyingRows,
        seed: 17,
        ..SimScenario::default()
    };
    let sim = generate(&sc).unwrap();
    let opts = DecompositionOptions::default();
    let rob = fit(&sim.data, Method::RobRsvd, 2, &opts).unwrap();
    let svd = fit(&sim.data, Method::Svd, 2, &opts).unwrap();
    let truth = sim.truth.left_basis();
    let a_rob = metric_principal_angle(&rob.left_basis(), &truth).unwrap();
    let a_svd = metric_principal_angle(&svd.left_basis(), &truth).unwrap();
    assert!(a_rob < a_svd, "{a_rob} vs {a_svd}");
}

#[test]
fn objective_is_monotone_with_fixed_smoothing() {
    for seed in 0..15 {
        let c = random_case(seed, 144);
        let grid = PenaltyGrid::fixed(c.spec.lambda_u, c.spec.lambda_v).unwrap();
        let loss = RobustLossSpec::new(1.345, ScaleSource::Fixed(0.4)).unwrap();
        let x = ObservedMatrix::complete(c.x.values().clone()).unwrap();
        let x = ObservedMatrix::new(x.values().clone(), vec![true; x.observed_count()], c.x.row_grid().to_vec(), c.x.col_grid().to_vec()).unwrap();
        let pair = fit_rank_one_robrsvd(&x, &loss, &grid, &IrlsOptions::default()).unwrap();
        for w in pair.diagnostics.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10 * w[0].abs(), "seed {seed}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn objective_is_monotone_after_smoothing_freezes() {
    let (x, _, _) = smooth_rank_one(25, 20, 0.3, 8);
    let pair = fit_rank_one(&x, Method::RobRsvd, &DecompositionOptions::default()).unwrap();
    let frozen = pair.diagnostics.lambda_frozen_after.unwrap();
    // trace entry 2k is the value after iteration k
    for w in pair.diagnostics.objective_trace[2 * frozen..].windows(2) {
        assert!(w[1] <= w[0] + 1e-10 * w[0].abs());
    }
    assert!(pair.converged);
}

#[test]
fn renormalization_is_neutral() {
    let (x, _, _) = smooth_rank_one(12, 10, 0.2, 4);
    let huber = Huber::new(1.345).unwrap();
    let svd = fit_rank_one_svd(&x).unwrap();
    let grid = PenaltyGrid::fixed(0.01, 0.02).unwrap();
    let opts = IrlsOptions {
        max_iter: 1,
        ..IrlsOptions::default()
    };
    let start = |c: f64| WarmStart {
        s: svd.s / c,
        u: svd.u.iter().map(|a| a * c).collect(),
        v: svd.v.clone(),
        lambda_u: 0.01,
        lambda_v: 0.02,
    };
    let a = irls_rank_one(&x, huber, 0.5, &grid, &opts, Some(start(1.0))).unwrap();
    let b = irls_rank_one(&x, huber, 0.5, &grid, &opts, Some(start(3.7))).unwrap();
    assert!(rel_err(&a.u, &b.u) < 1e-12 && rel_err(&a.v, &b.v) < 1e-12);
    assert!(rel_err_scalar(a.final_objective, b.final_objective) < 1e-12);
}

#[test]
fn weights_are_two_inside_threshold_and_zero_when_masked() {
    let x = ObservedMatrix::with_mask(Matrix::from_fn(3, 3, |i, j| (i * j) as f64), vec![true, true, true, true, false, true, true, true, true]).unwrap();
    let w = robust_weights(&x, &[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], Huber::default(), 1.0);
    assert_eq!(w.get(1, 1), 0.0);
    assert_eq!(w.get(2, 2), 2.0);
}

#[test]
fn missing_on_complete_input_is_a_plain_fit() {
    let x = random_matrix(6, 5, 2);
    let opts = DecompositionOptions::default();
    let (pair, state) = fit_with_missing(&x, Method::Rsvd, &opts).unwrap();
    assert_eq!(pair, fit_rank_one(&x, Method::Rsvd, &opts).unwrap());
    assert_eq!(state.round, 0);
}

fn masked_rank_one(seed: u64, frac: f64, noise: f64) -> (ObservedMatrix, Matrix, Vec<f64>, Vec<f64>) {
    let (clean, u, v) = smooth_rank_one(20, 16, 0.0, seed);
    let (noisy, _, _) = smooth_rank_one(20, 16, noise.max(1e-300), seed);
    let mut r = rng(seed + 1);
    let mask: Vec<bool> = (0..320).map(|c| c % 17 == 0 || r.random::<f64>() >= frac).collect();
    let x = ObservedMatrix::new(noisy.values().clone(), mask, clean.row_grid().to_vec(), clean.col_grid().to_vec()).unwrap();
    (x, clean.values().clone(), u, v)
}

#[test]
fn missing_cells_of_exact_rank_one_are_recovered() {
    let (x, truth, u, v) = masked_rank_one(3, 0.1, 0.0);
    assert!(!x.is_complete());
    let mut opts = DecompositionOptions::default();
    opts.imputation.tol = 1e-10;
    let (pair, state) = fit_with_missing(&x, Method::Svd, &opts).unwrap();
    assert!(state.converged);
    let s0 = robrsvd_core::linalg::dense::Svd::compute(&truth).s[0];
    assert!((pair.s - s0).abs() < 1e-6 && aligned(&pair.u, &u) < 1e-6 && aligned(&pair.v, &v) < 1e-6);
    for i in 0..20 {
        for j in 0..16 {
            if !x.is_observed(i, j) {
                assert!((state.filled[(i, j)] - truth[(i, j)]).abs() < 1e-6);
            } else {
                assert_eq!(state.filled[(i, j)].to_bits(), x.values()[(i, j)].to_bits());
            }
        }
    }
}

#[test]
fn row_and_column_mean_starts_agree() {
    let (x, _, _, _) = masked_rank_one(5, 0.1, 0.05);
    let mut opts = DecompositionOptions::default();
    let (a, _) = fit_with_missing(&x, Method::RobRsvd, &opts).unwrap();
    opts.imputation.initial_fill = InitialFill::ColumnMean;
    let (b, _) = fit_with_missing(&x, Method::RobRsvd, &opts).unwrap();
    assert!(aligned(&a.u, &b.u) < 1e-4 && aligned(&a.v, &b.v) < 1e-4);
}

#[test]
fn imputation_objective_is_monotone() {
    let (x, _, _, _) = masked_rank_one(9, 0.15, 0.1);
    for method in [Method::Svd, Method::Rsvd, Method::RobRsvd] {
        let opts = DecompositionOptions {
            grid: PenaltyGrid::fixed(1e-3, 1e-3).unwrap(),
            ..DecompositionOptions::default()
        };
        let (_, state) = fit_with_missing(&x, method, &opts).unwrap();
        assert!(state.objective_trace.len() >= 2);
        for w in state.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{method:?}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn empty_row_is_rejected() {
    let mut mask = vec![true; 12];
    for j in 0..4 {
        mask[4 + j] = false;
    }
    let x = ObservedMatrix::with_mask(Matrix::from_fn(3, 4, |i, j| (i + j) as f64), mask).unwrap();
    let err = fit_with_missing(&x, Method::Svd, &DecompositionOptions::default()).unwrap_err();
    assert_eq!(err, Error::EmptyLine { axis: Axis::Row, index: 1 });
}

#[test]
fn component_errors_carry_the_index() {
    // two columns cannot carry a roughness penalty
    let x = ObservedMatrix::complete(Matrix::from_fn(4, 2, |i, j| (i + 2 * j) as f64)).unwrap();
    match fit(&x, Method::Rsvd, 1, &DecompositionOptions::default()).unwrap_err() {
        Error::Component { index, source } => {
            assert_eq!(index, 0);
            assert!(matches!(*source, Error::Contract(_)));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(fit(&x, Method::Svd, 2, &DecompositionOptions::default()).is_ok());
}

#[test]
fn robust_fit_recovers_masked_exact_rank_one() {
    // residual scale is zero here; the fit must not stall in the L1 regime
    let (x, _, u, v) = masked_rank_one(3, 0.1, 0.0);
    let opts = DecompositionOptions {
        grid: PenaltyGrid::fixed(1e-12, 1e-12).unwrap(),
        imputation: ImputationOptions { tol: 1e-9, ..ImputationOptions::default() },
        ..DecompositionOptions::default()
    };
    let (pair, state) = fit_with_missing(&x, Method::RobRsvd, &opts).unwrap();
    assert!(state.converged && pair.diagnostics.sigma > 1e-3);
    assert!(aligned(&pair.u, &u) < 1e-6 && aligned(&pair.v, &v) < 1e-6);
}
