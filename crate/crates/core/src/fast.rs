//! Accelerated ADMM with a residual-based restart, used as a baseline.
//!
//! Each step runs the standard kernel from `(ẑ, û)`, then extrapolates
//! `ẑ⁺ = αz⁺ + (1 − α)z` (likewise `û`) with Nesterov weights
//! `β⁺ = (1 + √(1 + 4β²))/2`, `α = 1 + (β − 1)/β⁺`. A step whose combined
//! residual `max(‖r‖, ‖s‖)` does not decrease falls back to `α = 1`.

use serde::{Deserialize, Serialize};

use crate::cost::{Status, StopRule};
use crate::error::Result;
use crate::qp::{QpInit, QpParams, QpProblem, QpRun, QpSolver, QpState, ResidualTrace, SolveOptions, DIVERGENCE_GUARD};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FastOptions {
    /// Apply the restart rule; when false every step is accepted.
    pub restart: bool,
    /// Reset β to 1 on restart.
    pub reset_beta: bool,
    /// Hold β at 1, which disables extrapolation.
    pub pin_beta: bool,
}

impl Default for FastOptions {
    fn default() -> Self {
        Self {
            restart: true,
            reset_beta: true,
            pin_beta: false,
        }
    }
}

/// `β⁺ = (1 + √(1 + 4β²))/2`
pub fn next_beta(beta: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * beta * beta).sqrt())
}

#[derive(Clone, Debug)]
pub struct FastRun {
    pub run: QpRun,
    /// Extrapolation weight used after each step.
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub restarts: usize,
}

fn extrapolate(alpha: f64, new: &[f64], old: &[f64]) -> Vec<f64> {
    if alpha == 1.0 {
        return new.to_vec();
    }
    new.iter()
        .zip(old)
        .map(|(n, o)| alpha * n + (1.0 - alpha) * o)
        .collect()
}

/// Fast ADMM from the same defaults as [`crate::qp::solve_qp`]. The dual
/// residual is measured against the extrapolated `ẑ` the step started from.
pub fn solve_qp_fast(
    problem: &QpProblem,
    rho: f64,
    scaling: Option<Vec<f64>>,
    init: &QpInit,
    stop: StopRule,
    options: FastOptions,
    solve_options: SolveOptions,
) -> Result<FastRun> {
    let params = QpParams {
        rho,
        alpha: 1.0,
        scaling,
    };
    let solver = QpSolver::new(problem, &params, solve_options)?;
    let mut state = solver.initial_state(init)?;
    let (mut z_hat, mut u_hat) = (state.z.clone(), state.u.clone());
    let mut beta: f64 = 1.0;
    let mut last = f64::INFINITY;
    let mut trace = ResidualTrace::default();
    let (mut alphas, mut betas, mut restarts) = (Vec::new(), vec![beta], 0);
    let mut status = Status::MaxIterations;

    while state.k < stop.max_iter {
        let out = solver.kernel(&z_hat, &u_hat, 1.0);
        let (r, s) = solver.residuals(&out.x, &out.z, &z_hat);
        let next = QpState {
            v: out.z.iter().zip(&out.u).map(|(z, u)| z + u).collect(),
            x: out.x,
            z: out.z,
            u: out.u,
            f: out.f,
            k: state.k + 1,
        };
        let rec = solver.record(&state, &next, &r, &s);
        let combined = rec.combined();

        let alpha = if !options.restart || combined < last {
            let b_next = if options.pin_beta { 1.0 } else { next_beta(beta) };
            let a = 1.0 + (beta - 1.0) / b_next;
            beta = b_next;
            a
        } else {
            restarts += 1;
            if options.reset_beta {
                beta = 1.0;
            }
            1.0
        };
        z_hat = extrapolate(alpha, &next.z, &state.z);
        u_hat = extrapolate(alpha, &next.u, &state.u);
        alphas.push(alpha);
        betas.push(beta);
        last = combined;

        trace.steps.push(rec);
        state = next;
        if !(state.norm() <= DIVERGENCE_GUARD) {
            status = Status::Diverged;
            break;
        }
        if combined <= stop.tol {
            status = Status::Converged;
            break;
        }
    }

    Ok(FastRun {
        run: QpRun {
            mu: solver.multiplier(&state.u),
            iterations: state.k,
            state,
            status,
            trace,
            identities: None,
            fv_bound: None,
        },
        alphas,
        betas,
        restarts,
    })
}
