//! Benchmark harness for tuned ADMM: parameter sweeps, method comparisons,
//! convergence traces and MPC batch generation.

// `!(x > 0.0)` is how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod instances;
pub mod runs;
