//! Robust regularized singular value decomposition for two-way functional
//! data.
//!
//! A data matrix whose rows and columns are both discretized smooth curves
//! is approximated by a sequence of rank-one terms `s u v^T`. Each term
//! minimizes a Huber loss on the scaled residuals plus a two-way roughness
//! penalty on `u` and `v`, fitted by alternating penalized IRLS with
//! smoothing parameters chosen by GCV. Plain SVD and the squared-loss
//! regularized SVD are available as baselines.
//!
//! ```
//! use robrsvd_core::{fit, DecompositionOptions, Matrix, Method, ObservedMatrix};
//!
//! let u = [1.0, 2.0, 3.0, 4.0];
//! let v = [1.0, 0.5, -0.5, -1.0, 0.0];
//! let x = ObservedMatrix::complete(Matrix::outer(2.0, &u, &v)).unwrap();
//! let dec = fit(&x, Method::Svd, 1, &DecompositionOptions::default()).unwrap();
//! assert!(dec.residual.frobenius_norm() < 1e-10);
//! ```
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod bench;
pub mod decomp;
pub mod error;
pub mod linalg;
pub mod loss;
pub mod matrix;
pub mod missing;
pub mod penalty;
pub mod select;
pub mod sim;
pub mod spline;
pub mod transform;

pub use decomp::{
    fit, fit_rank_one, fit_rank_one_robrsvd, fit_rank_one_rsvd, fit_rank_one_svd, hat_trace_u, hat_trace_v,
    update_u_given_v, update_v_given_u, ComponentPair, Decomposition, DecompositionOptions, IrlsOptions, Method,
    PenaltyGrid,
};
pub use error::{Axis, Error, Result};
pub use loss::{estimate_scale_mad, huber_rho, huber_weight, Huber, RobustLossSpec, ScaleSource};
pub use matrix::{residual, Matrix, ObservedMatrix, ResidualMatrix, WeightMatrix};
pub use missing::{fit_with_missing, initial_fill, ImputationOptions, ImputationState, InitialFill};
pub use penalty::{
    build_roughness_penalty, conditional_penalty_u, conditional_penalty_v, two_way_penalty, PenaltyKind,
    RoughnessPenalty, TwoWayPenaltySpec,
};
pub use select::{gcv_u, gcv_v, select_lambda, GcvRecord, GcvTrace, LambdaGrid};
pub use spline::{interpolate, SplineFunction};
pub use transform::{energy_percentages, log_transform};
