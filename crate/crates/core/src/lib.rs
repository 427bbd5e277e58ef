//! ADMM for quadratic problems with closed-form step-size and relaxation
//! tuning.
//!
//! Two problem classes are covered: ℓ2-regularized quadratic minimization
//! ([`l2reg`]) and inequality-constrained QP ([`qp`]). Around them sit a
//! diagonal constraint preconditioner ([`precond`]), an accelerated baseline
//! with restart ([`fast`]) and an MPC condenser that produces realistic QP
//! batches ([`mpc`]).

// `!(x > 0.0)` is how NaN gets rejected; index loops mirror the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cost;
pub mod diagnostics;
pub mod error;
pub mod fast;
pub mod io;
pub mod l2reg;
pub mod linalg;
pub mod mpc;
pub mod precond;
pub mod qp;
pub mod random;

pub use cost::{QuadCost, Status, StopRule};
pub use error::{Error, Result};
