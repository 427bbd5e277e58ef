use serde::{Deserialize, Serialize};

use super::{compute_m, QpProblem};
use crate::cost::{Status, StopRule};
use crate::diagnostics::tail_factor;
use crate::error::{Error, Result};
use crate::linalg::{norm, projectors, sub, Cholesky, Matrix, ResidualProjectors, SymMatrix};

pub const DEFAULT_STOP: StopRule = StopRule::new(1e-5, 100_000);
/// `‖(x, z, u)‖` above this marks the run infeasible or unbounded.
pub const DIVERGENCE_GUARD: f64 = 1e12;
pub const FV_FACTOR_WINDOW: usize = 30;
pub const FV_FACTOR_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpParams {
    pub rho: f64,
    pub alpha: f64,
    /// Diagonal of `L`; `None` is the identity.
    pub scaling: Option<Vec<f64>>,
}

impl QpParams {
    pub fn new(rho: f64, alpha: f64) -> Self {
        Self {
            rho,
            alpha,
            scaling: None,
        }
    }

    pub fn with_scaling(mut self, l: Vec<f64>) -> Self {
        self.scaling = Some(l);
        self
    }
}

/// Missing entries default to `x⁰ = 0`, `z⁰ = max(0, c̄)`, `u⁰ = 0`.
#[derive(Clone, Debug, Default)]
pub struct QpInit {
    pub x: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
    pub u: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Record ε_k, δ_k and ζ̲^k (needs `M`).
    pub diagnostics: bool,
    /// Evaluate the residual identities at every step.
    pub check_identities: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            diagnostics: true,
            check_identities: true,
        }
    }
}

impl SolveOptions {
    pub const FAST: Self = Self {
        diagnostics: false,
        check_identities: false,
    };
}

/// Iterate of the scaled problem. `v = z + u`, `F = 2D − I`, `Fv = u − z`.
#[derive(Clone, Debug, PartialEq)]
pub struct QpState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Diagonal of `F`, entries ±1.
    pub f: Vec<f64>,
    pub k: usize,
}

impl QpState {
    fn from_parts(x: Vec<f64>, z: Vec<f64>, u: Vec<f64>, f: Vec<f64>, k: usize) -> Self {
        let v = z.iter().zip(&u).map(|(a, b)| a + b).collect();
        Self { x, z, u, v, f, k }
    }

    /// Diagonal of `D = (I + F)/2`.
    pub fn d(&self) -> Vec<f64> {
        self.f.iter().map(|f| 0.5 * (1.0 + f)).collect()
    }

    /// `F v`
    pub fn fv(&self) -> Vec<f64> {
        self.f.iter().zip(&self.v).map(|(f, v)| f * v).collect()
    }

    pub fn norm(&self) -> f64 {
        (norm(&self.x).powi(2) + norm(&self.z).powi(2) + norm(&self.u).powi(2)).sqrt()
    }
}

/// Per-iteration residuals; index `k` refers to the state produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub r_norm: f64,
    pub s_norm: f64,
    /// `‖F^k v^k − F^{k−1} v^{k−1}‖`
    pub fv_norm: f64,
    /// `‖v^k − v^{k−1}‖`
    pub dv_norm: f64,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub zeta_lb: Option<f64>,
}

impl StepRecord {
    pub fn combined(&self) -> f64 {
        self.r_norm.max(self.s_norm)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualTrace {
    pub steps: Vec<StepRecord>,
}

impl ResidualTrace {
    pub fn fv_norms(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.fv_norm).collect()
    }

    /// Tail geometric mean of `‖fv^{k+1}‖/‖fv^k‖`.
    pub fn empirical_factor(&self) -> Option<f64> {
        tail_factor(&self.fv_norms(), FV_FACTOR_WINDOW, FV_FACTOR_FLOOR)
    }

    /// `ζ̲ = max_k ζ̲^k` over the defined entries.
    pub fn max_zeta_lb(&self) -> Option<f64> {
        self.steps
            .iter()
            .filter_map(|s| s.zeta_lb)
            .fold(None, |m, z| Some(m.map_or(z, |m: f64| m.max(z))))
    }

    pub fn last(&self) -> Option<&StepRecord> {
        self.steps.last()
    }
}

/// Worst slack seen in the residual identities. Equalities are reported as
/// relative errors, bounds as `lhs − rhs` (≤ 0 when the bound holds).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// `Fv⁺ − Fv = α(r − Rs/ρ − ΠΔz)`
    pub fv_identity: f64,
    /// `v⁺ − v = αr + (2 − α)(Rs/ρ + ΠΔz)`
    pub dv_identity: f64,
    /// `‖r‖ − ‖Fv⁺ − Fv‖/α`
    pub r_bound: f64,
    /// `‖s‖ − ρ‖Ā‖‖Fv⁺ − Fv‖`
    pub s_bound: f64,
}

impl IdentityCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.fv_identity <= tol && self.dv_identity <= tol && self.r_bound <= tol && self.s_bound <= tol
    }

    pub fn merge(&mut self, other: &Self) {
        self.fv_identity = self.fv_identity.max(other.fv_identity);
        self.dv_identity = self.dv_identity.max(other.dv_identity);
        self.r_bound = self.r_bound.max(other.r_bound);
        self.s_bound = self.s_bound.max(other.s_bound);
    }

    fn worst() -> Self {
        Self {
            fv_identity: f64::NEG_INFINITY,
            dv_identity: f64::NEG_INFINITY,
            r_bound: f64::NEG_INFINITY,
            s_bound: f64::NEG_INFINITY,
        }
    }
}

/// Output of one kernel application.
#[derive(Clone, Debug)]
pub struct KernelOut {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub f: Vec<f64>,
}

/// Constraint geometry and cached factorization for a fixed `(ρ, L)`.
pub struct QpSolver<'a> {
    problem: &'a QpProblem,
    a_bar: Matrix,
    c_bar: Vec<f64>,
    rho: f64,
    alpha: f64,
    scaling: Option<Vec<f64>>,
    chol: Cholesky,
    m: Option<SymMatrix>,
    proj: Option<ResidualProjectors>,
    a_norm: f64,
}

impl<'a> QpSolver<'a> {
    pub fn new(problem: &'a QpProblem, params: &QpParams, options: SolveOptions) -> Result<Self> {
        if !(params.rho > 0.0) || !params.rho.is_finite() {
            return Err(Error::InvalidParameter(format!("rho must be > 0, got {}", params.rho)));
        }
        if !(params.alpha > 0.0 && params.alpha <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 2], got {}",
                params.alpha
            )));
        }
        if let Some(l) = &params.scaling {
            if l.len() != problem.m() || l.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidParameter("scaling must be m positive entries".into()));
            }
        }
        let (a_bar, c_bar) = problem.scaled(params.scaling.as_deref());
        let k = problem
            .cost()
            .hessian()
            .add(&a_bar.gram().scale(params.rho))
            .symmetrized();
        let chol = Cholesky::new(&k)?;
        let m = if options.diagnostics {
            Some(compute_m(problem, params.rho, params.scaling.as_deref())?)
        } else {
            None
        };
        let proj = if options.check_identities {
            Some(projectors(&a_bar)?)
        } else {
            None
        };
        let a_norm = if options.check_identities {
            a_bar.spectral_norm()
        } else {
            f64::NAN
        };
        Ok(Self {
            problem,
            a_bar,
            c_bar,
            rho: params.rho,
            alpha: params.alpha,
            scaling: params.scaling.clone(),
            chol,
            m,
            proj,
            a_norm,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn a_bar(&self) -> &Matrix {
        &self.a_bar
    }

    pub fn c_bar(&self) -> &[f64] {
        &self.c_bar
    }

    pub fn m_matrix(&self) -> Option<&SymMatrix> {
        self.m.as_ref()
    }

    pub fn initial_state(&self, init: &QpInit) -> Result<QpState> {
        let (n, m) = (self.problem.n(), self.problem.m());
        let x = init.x.clone().unwrap_or_else(|| vec![0.0; n]);
        let z = init
            .z
            .clone()
            .unwrap_or_else(|| self.c_bar.iter().map(|c| c.max(0.0)).collect());
        let u = init.u.clone().unwrap_or_else(|| vec![0.0; m]);
        if x.len() != n || z.len() != m || u.len() != m {
            return Err(Error::DimensionMismatch("initial iterate sizes".into()));
        }
        let f = u.iter().map(|&u| if u > 0.0 { 1.0 } else { -1.0 }).collect();
        Ok(QpState::from_parts(x, z, u, f, 0))
    }

    /// One update from `(z_in, u_in)`:
    /// `x⁺ = −(Q + ρĀᵀĀ)⁻¹[q + ρĀᵀ(z_in + u_in − c̄)]`,
    /// `t = −α(Āx⁺ − c̄) + (1 − α)z_in − u_in`, `z⁺ = max(0, t)`, `u⁺ = max(0, −t)`.
    pub fn kernel(&self, z_in: &[f64], u_in: &[f64], alpha: f64) -> KernelOut {
        let w: Vec<f64> = (0..z_in.len()).map(|i| z_in[i] + u_in[i] - self.c_bar[i]).collect();
        let mut rhs = self.a_bar.tr_mul_vec(&w);
        for (r, q) in rhs.iter_mut().zip(self.problem.cost().linear()) {
            *r = -(q + self.rho * *r);
        }
        let x = self.chol.solve(&rhs);
        let ax = self.a_bar.mul_vec(&x);
        let mut z = vec![0.0; z_in.len()];
        let mut u = vec![0.0; z_in.len()];
        let mut f = vec![0.0; z_in.len()];
        for i in 0..z_in.len() {
            let t = -alpha * (ax[i] - self.c_bar[i]) + (1.0 - alpha) * z_in[i] - u_in[i];
            z[i] = t.max(0.0);
            u[i] = (-t).max(0.0);
            // sign(0) = +1
            f[i] = if t <= 0.0 { 1.0 } else { -1.0 };
        }
        KernelOut { x, z, u, f }
    }

    /// `r = Āx + z − c̄`, `s = ρĀᵀ(z − z_in)`.
    pub fn residuals(&self, x: &[f64], z: &[f64], z_in: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut r = self.a_bar.mul_vec(x);
        for i in 0..r.len() {
            r[i] += z[i] - self.c_bar[i];
        }
        let dz = sub(z, z_in);
        let s = self.a_bar.tr_mul_vec(&dz).into_iter().map(|v| self.rho * v).collect();
        (r, s)
    }

    /// Builds the trace record for the transition `prev → next`.
    pub fn record(&self, prev: &QpState, next: &QpState, r: &[f64], s: &[f64]) -> StepRecord {
        let fv = sub(&next.fv(), &prev.fv());
        let dv = sub(&next.v, &prev.v);
        let fv_norm = norm(&fv);
        let (eps, delta, zeta_lb) = match &self.m {
            Some(m) if fv_norm > 0.0 => {
                let du = sub(&next.u, &prev.u);
                let e = norm(&m.mul_vec(&dv)) / fv_norm;
                let d = norm(&du) / fv_norm;
                (Some(e), Some(d), Some((d - e).abs()))
            }
            _ => (None, None, None),
        };
        StepRecord {
            k: next.k,
            r_norm: norm(r),
            s_norm: norm(s),
            fv_norm,
            dv_norm: norm(&dv),
            eps,
            delta,
            zeta_lb,
        }
    }

    /// Residual identities for one standard-kernel transition.
    pub fn check_identities(&self, prev: &QpState, next: &QpState, r: &[f64], s: &[f64]) -> Option<IdentityCheck> {
        let proj = self.proj.as_ref()?;
        Some(residual_identities_check(
            proj,
            self.rho,
            self.alpha,
            self.a_norm,
            prev,
            next,
            r,
            s,
        ))
    }

    pub fn step(&self, state: &QpState) -> (QpState, Vec<f64>, Vec<f64>) {
        let out = self.kernel(&state.z, &state.u, self.alpha);
        let (r, s) = self.residuals(&out.x, &out.z, &state.z);
        let next = QpState::from_parts(out.x, out.z, out.u, out.f, state.k + 1);
        (next, r, s)
    }

    /// Original-coordinate multiplier `μ = ρLū`.
    pub fn multiplier(&self, u: &[f64]) -> Vec<f64> {
        match &self.scaling {
            None => u.iter().map(|u| self.rho * u).collect(),
            Some(l) => u.iter().zip(l).map(|(u, l)| self.rho * l * u).collect(),
        }
    }
}

/// Checks, for the transition `prev → next` with `Δz = z⁺ − z`,
///
/// ```text
/// F⁺v⁺ − Fv = α(r − Rs/ρ − ΠΔz)
/// v⁺ − v    = αr + (2 − α)(Rs/ρ + ΠΔz)
/// ‖r‖ ≤ ‖F⁺v⁺ − Fv‖/α,   ‖s‖ ≤ ρ‖Ā‖‖F⁺v⁺ − Fv‖
/// ```
#[allow(clippy::too_many_arguments)]
pub fn residual_identities_check(
    proj: &ResidualProjectors,
    rho: f64,
    alpha: f64,
    a_norm: f64,
    prev: &QpState,
    next: &QpState,
    r: &[f64],
    s: &[f64],
) -> IdentityCheck {
    let fv = sub(&next.fv(), &prev.fv());
    let dv = sub(&next.v, &prev.v);
    let dz = sub(&next.z, &prev.z);
    let rs: Vec<f64> = proj.r.mul_vec(s).into_iter().map(|v| v / rho).collect();
    let pdz = proj.null_proj.apply(&dz);
    let recovered: Vec<f64> = rs.iter().zip(&pdz).map(|(a, b)| a + b).collect();
    let scale = norm(r).max(norm(&dz)).max(norm(&fv)).max(1.0);

    let fv_pred: Vec<f64> = (0..r.len()).map(|i| alpha * (r[i] - recovered[i])).collect();
    let dv_pred: Vec<f64> = (0..r.len())
        .map(|i| alpha * r[i] + (2.0 - alpha) * recovered[i])
        .collect();
    let fv_norm = norm(&fv);
    IdentityCheck {
        fv_identity: norm(&sub(&fv, &fv_pred)) / scale,
        dv_identity: norm(&sub(&dv, &dv_pred)) / scale,
        r_bound: norm(r) - fv_norm / alpha - 1e-12 * scale,
        s_bound: norm(s) - rho * a_norm * fv_norm * (1.0 + 1e-12) - 1e-12 * scale,
    }
}

/// KKT residuals of the original problem at `(x, μ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `‖Qx + q + Aᵀμ‖_∞`
    pub stationarity: f64,
    /// `max(0, max_i (Ax − c)_i)`
    pub primal: f64,
    /// `max(0, −min_i μ_i)`
    pub dual: f64,
    /// `max_i |μ_i (c − Ax)_i|`
    pub complementarity: f64,
}

impl KktReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.stationarity <= tol && self.primal <= tol && self.dual <= tol && self.complementarity <= tol
    }

    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

pub fn kkt_check(problem: &QpProblem, x: &[f64], mu: &[f64]) -> KktReport {
    let mut g = problem.cost().gradient(x);
    for (gi, ai) in g.iter_mut().zip(problem.a().tr_mul_vec(mu)) {
        *gi += ai;
    }
    let slack: Vec<f64> = problem
        .a()
        .mul_vec(x)
        .iter()
        .zip(problem.c())
        .map(|(ax, c)| c - ax)
        .collect();
    KktReport {
        stationarity: g.iter().fold(0.0, |m, v| m.max(v.abs())),
        primal: slack.iter().fold(0.0, |m, s| m.max(-s)),
        dual: mu.iter().fold(0.0, |m, v| m.max(-v)),
        complementarity: mu.iter().zip(&slack).fold(0.0, |m, (mu, s)| m.max((mu * s).abs())),
    }
}

/// Result of [`solve_qp`].
#[derive(Clone, Debug)]
pub struct QpRun {
    pub state: QpState,
    /// Multiplier of the original constraints.
    pub mu: Vec<f64>,
    pub status: Status,
    pub iterations: usize,
    pub trace: ResidualTrace,
    /// Worst identity slack over the run; `None` when not checked.
    pub identities: Option<IdentityCheck>,
    /// `½‖2M − I‖ + ½` over the nonzero spectrum of `M`, if `M` was built.
    pub fv_bound: Option<f64>,
}

impl QpRun {
    pub fn x(&self) -> &[f64] {
        &self.state.x
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn kkt(&self, problem: &QpProblem) -> KktReport {
        kkt_check(problem, &self.state.x, &self.mu)
    }
}

/// Standard (α = 1) or relaxed ADMM until `max(‖r‖, ‖s‖) ≤ tol`.
pub fn solve_qp(
    problem: &QpProblem,
    params: &QpParams,
    init: &QpInit,
    stop: StopRule,
    options: SolveOptions,
) -> Result<QpRun> {
    let solver = QpSolver::new(problem, params, options)?;
    let mut state = solver.initial_state(init)?;
    let mut trace = ResidualTrace::default();
    let mut identities = options.check_identities.then(IdentityCheck::worst);
    let mut status = Status::MaxIterations;

    while state.k < stop.max_iter {
        let (next, r, s) = solver.step(&state);
        let rec = solver.record(&state, &next, &r, &s);
        if let (Some(acc), Some(c)) = (identities.as_mut(), solver.check_identities(&state, &next, &r, &s)) {
            acc.merge(&c);
        }
        trace.steps.push(rec);
        state = next;
        if !(state.norm() <= DIVERGENCE_GUARD) {
            status = Status::Diverged;
            break;
        }
        if rec.combined() <= stop.tol {
            status = Status::Converged;
            break;
        }
    }

    let fv_bound = solver.m_matrix().map(|m| super::fv_contraction_bound(m, true));
    Ok(QpRun {
        mu: solver.multiplier(&state.u),
        iterations: state.k,
        state,
        status,
        trace,
        identities: identities.filter(|c| c.fv_identity.is_finite()),
        fv_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;
    use approx::assert_relative_eq;

    fn one_d() -> QpProblem {
        QpProblem::from_parts(
            SymMatrix::identity(1),
            vec![0.0],
            Matrix::from_rows(&[[1.0]]),
            vec![-1.0],
        )
        .unwrap()
    }

    #[test]
    fn one_dimensional_active() {
        let p = one_d();
        let rho = 0.7;
        let stop = StopRule::new(1e-10, 1000);
        let run = solve_qp(
            &p,
            &QpParams::new(rho, 1.0),
            &QpInit::default(),
            stop,
            SolveOptions::default(),
        )
        .unwrap();
        assert!(run.converged());
        assert_relative_eq!(run.x()[0], -1.0, epsilon = 1e-9);
        assert_relative_eq!(run.mu[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(run.state.u[0], 1.0 / rho, epsilon = 1e-9);
        assert!(run.kkt(&p).holds(1e-9));
        assert!(run.identities.unwrap().holds(1e-8));
    }

    #[test]
    fn interior_optimum() {
        let p = QpProblem::from_parts(
            SymMatrix::identity(2),
            vec![-0.5, 0.25],
            Matrix::identity(2).vstack(&Matrix::identity(2).scale(-1.0)),
            vec![1.0; 4],
        )
        .unwrap();
        let run = solve_qp(
            &p,
            &QpParams::new(1.0, 1.0),
            &QpInit::default(),
            DEFAULT_STOP,
            SolveOptions::default(),
        )
        .unwrap();
        assert!(run.converged());
        assert!(run.state.u.iter().all(|&u| u == 0.0));
        let slack: Vec<f64> = p.a().mul_vec(run.x()).iter().zip(p.c()).map(|(a, c)| c - a).collect();
        for (z, s) in run.state.z.iter().zip(slack) {
            assert!(*z > 0.0);
            assert_relative_eq!(*z, s, epsilon = 1e-5);
        }
    }

    #[test]
    fn complementarity_and_decomposition() {
        let p = one_d();
        let solver = QpSolver::new(&p, &QpParams::new(2.0, 1.5), SolveOptions::default()).unwrap();
        let mut s = solver.initial_state(&QpInit::default()).unwrap();
        for _ in 0..20 {
            s = solver.step(&s).0;
            let d = s.d();
            for i in 0..s.z.len() {
                assert_eq!(s.z[i] * s.u[i], 0.0);
                assert_eq!(d[i] * s.v[i], s.u[i]);
                assert_eq!((1.0 - d[i]) * s.v[i], s.z[i]);
            }
        }
    }

    #[test]
    fn zero_fv_is_undefined() {
        let p = one_d();
        let solver = QpSolver::new(&p, &QpParams::new(1.0, 1.0), SolveOptions::default()).unwrap();
        let s = solver.initial_state(&QpInit::default()).unwrap();
        let rec = solver.record(&s, &s, &[0.0], &[0.0]);
        assert_eq!(rec.zeta_lb, None);
    }

    #[test]
    fn rejects_bad_params() {
        let p = one_d();
        assert!(QpSolver::new(&p, &QpParams::new(0.0, 1.0), SolveOptions::default()).is_err());
        assert!(QpSolver::new(&p, &QpParams::new(1.0, 2.5), SolveOptions::default()).is_err());
    }
}
