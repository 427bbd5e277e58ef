//! Single solver runs and the records they produce.

use std::time::Instant;

use admm_tune::fast::{solve_qp_fast, FastOptions};
use admm_tune::l2reg::{
    baseline_gradient, baseline_heavy_ball, solve_l2, tune_l2, BaselineTrace, L2Init, L2Problem, L2Trace,
};
use admm_tune::precond::optimal_scaling;
use admm_tune::qp::{solve_qp, tune_qp, QpInit, QpParams, QpProblem, QpSpectral, ResidualTrace, SolveOptions};
use admm_tune::{Status, StopRule};
use serde::{Deserialize, Serialize};

use crate::config::{Method, Scaling};
use crate::error::{CliError, Result};

/// One row of a sweep. `rho` and `alpha` are `None` for the gradient
/// baselines; residual fields are filled per problem class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: usize,
    pub method: Method,
    pub scaling: Scaling,
    pub rho: Option<f64>,
    pub alpha: Option<f64>,
    /// `None` when the run could not start; see `message`.
    pub status: Option<Status>,
    pub iterations: Option<usize>,
    pub r_norm: Option<f64>,
    pub s_norm: Option<f64>,
    /// ℓ2: final dual error for ADMM, final `‖x − x*‖` for the baselines.
    pub final_error: Option<f64>,
    pub empirical_factor: Option<f64>,
    pub wall_ms: f64,
    pub message: String,
}

impl RunRecord {
    fn new(instance: usize, method: Method, scaling: Scaling) -> Self {
        Self {
            instance,
            method,
            scaling,
            rho: None,
            alpha: None,
            status: None,
            iterations: None,
            r_norm: None,
            s_norm: None,
            final_error: None,
            empirical_factor: None,
            wall_ms: 0.0,
            message: String::new(),
        }
    }

    pub fn converged(&self) -> bool {
        self.status == Some(Status::Converged)
    }

    /// Iterations for ranking; unconverged runs rank last.
    pub fn effective_iterations(&self) -> usize {
        if self.converged() {
            self.iterations.unwrap_or(usize::MAX)
        } else {
            usize::MAX
        }
    }
}

/// Convergence history kept by `solve`.
#[derive(Clone, Debug)]
pub enum Trace {
    Qp(ResidualTrace),
    L2(L2Trace),
    Baseline(BaselineTrace),
}

/// What to run: `rho = None` selects the method's own default.
#[derive(Clone, Copy, Debug)]
pub struct RunSpec {
    pub method: Method,
    pub scaling: Scaling,
    pub rho: Option<f64>,
    pub alpha: f64,
    pub stop: StopRule,
}

/// Runs `spec`, converting solver errors into a record with a message.
pub fn run_qp(id: usize, p: &QpProblem, spec: RunSpec) -> (RunRecord, Option<Trace>) {
    let mut rec = RunRecord::new(id, spec.method, spec.scaling);
    let t0 = Instant::now();
    let out = qp_inner(p, spec, &mut rec);
    rec.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
    match out {
        Ok(trace) => (rec, Some(trace)),
        Err(e) => {
            rec.message = e.to_string();
            (rec, None)
        }
    }
}

fn qp_inner(p: &QpProblem, spec: RunSpec, rec: &mut RunRecord) -> Result<Trace> {
    let l = match spec.scaling {
        Scaling::None => None,
        Scaling::Optimal => Some(optimal_scaling(p.cost().hessian(), p.a())?.l),
    };
    let tuned = || -> Result<f64> { Ok(tune_qp(&QpSpectral::compute(p, l.as_deref())?).rho_star) };
    let init = QpInit::default();
    let params = |rho: f64, alpha: f64| {
        let base = QpParams::new(rho, alpha);
        match &l {
            Some(l) => base.with_scaling(l.clone()),
            None => base,
        }
    };
    let (rho, alpha) = match spec.method {
        Method::Admm => (spec.rho.map_or_else(tuned, Ok)?, 1.0),
        Method::AdmmRelaxed => (spec.rho.map_or_else(tuned, Ok)?, spec.alpha),
        // The untuned baseline uses ρ = 1.
        Method::FastAdmm => (spec.rho.unwrap_or(1.0), 1.0),
        Method::FastAdmmTuned => (tuned()?, 1.0),
        Method::Gradient | Method::HeavyBall => {
            return Err(CliError::Config(format!(
                "{} needs an unconstrained ℓ2 problem",
                spec.method.name()
            )))
        }
    };
    rec.rho = Some(rho);
    rec.alpha = Some(alpha);
    let run = match spec.method {
        Method::FastAdmm | Method::FastAdmmTuned => {
            solve_qp_fast(
                p,
                rho,
                l.clone(),
                &init,
                spec.stop,
                FastOptions::default(),
                SolveOptions::FAST,
            )?
            .run
        }
        _ => solve_qp(p, &params(rho, alpha), &init, spec.stop, SolveOptions::FAST)?,
    };
    rec.status = Some(run.status);
    rec.iterations = Some(run.iterations);
    if let Some(last) = run.trace.last() {
        rec.r_norm = Some(last.r_norm);
        rec.s_norm = Some(last.s_norm);
    }
    rec.empirical_factor = run.trace.empirical_factor();
    Ok(Trace::Qp(run.trace))
}

pub fn run_l2(id: usize, p: &L2Problem, spec: RunSpec) -> (RunRecord, Option<Trace>) {
    let mut rec = RunRecord::new(id, spec.method, spec.scaling);
    let t0 = Instant::now();
    let out = l2_inner(p, spec, &mut rec);
    rec.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
    match out {
        Ok(trace) => (rec, Some(trace)),
        Err(e) => {
            rec.message = e.to_string();
            (rec, None)
        }
    }
}

fn l2_inner(p: &L2Problem, spec: RunSpec, rec: &mut RunRecord) -> Result<Trace> {
    if spec.scaling != Scaling::None {
        return Err(CliError::Config("constraint scaling applies to QPs only".into()));
    }
    let t = tune_l2(p);
    let (rho, alpha) = match spec.method {
        Method::Admm => (spec.rho.unwrap_or(t.rho_star), 1.0),
        Method::AdmmRelaxed => (spec.rho.unwrap_or(t.relaxed_rho_star), spec.alpha),
        Method::Gradient | Method::HeavyBall => {
            let b = if spec.method == Method::Gradient {
                baseline_gradient(p, None, spec.stop)
            } else {
                baseline_heavy_ball(p, None, spec.stop)
            };
            rec.status = Some(b.status);
            rec.iterations = Some(b.iterations);
            rec.final_error = b.error.last().copied();
            rec.empirical_factor = b.empirical_factor();
            return Ok(Trace::Baseline(b));
        }
        Method::FastAdmm | Method::FastAdmmTuned => {
            return Err(CliError::Config(format!(
                "{} needs a constrained QP",
                spec.method.name()
            )))
        }
    };
    rec.rho = Some(rho);
    rec.alpha = Some(alpha);
    let trace = solve_l2(p, rho, alpha, &L2Init::default(), spec.stop)?;
    rec.status = Some(trace.status);
    rec.iterations = Some(trace.iterations);
    rec.final_error = trace.dual_error.last().copied();
    rec.empirical_factor = trace.empirical_factor();
    if trace.alpha_warning {
        rec.message = "alpha outside the convergence interval".into();
    }
    Ok(Trace::L2(trace))
}
