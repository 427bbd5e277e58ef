//! ADMM for ℓ2-regularized quadratic minimization
//!
//! ```text
//! minimize ½ xᵀQx + qᵀx + (δ/2)‖z‖²   subject to  x = z
//! ```
//!
//! with closed-form optimal step size, over-relaxation, and the gradient and
//! heavy-ball methods as comparators.

use serde::{Deserialize, Serialize};

use crate::cost::{QuadCost, Status, StopRule};
use crate::diagnostics::tail_factor;
use crate::error::{Error, Result};
use crate::linalg::{dist, norm, sym_eig, Cholesky, EigenDecomp, Matrix, SymMatrix};

pub const DEFAULT_STOP: StopRule = StopRule::new(1e-10, 100_000);

/// Window and floors of the dual-error factor estimator.
pub const FACTOR_WINDOW: usize = 50;
pub const FACTOR_TARGET: f64 = 1e-9;
pub const FACTOR_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug)]
pub struct L2Problem {
    cost: QuadCost,
    delta: f64,
    eig: EigenDecomp,
}

impl L2Problem {
    pub fn new(cost: QuadCost, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
        }
        let eig = sym_eig(cost.hessian());
        Ok(Self { cost, delta, eig })
    }

    pub fn from_parts(q_mat: SymMatrix, q: Vec<f64>, delta: f64) -> Result<Self> {
        Self::new(QuadCost::new(q_mat, q)?, delta)
    }

    pub fn cost(&self) -> &QuadCost {
        &self.cost
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.cost.dim()
    }

    /// Eigenvalues of `Q`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.values
    }

    pub fn lam_min(&self) -> f64 {
        self.eig.min()
    }

    pub fn lam_max(&self) -> f64 {
        self.eig.max()
    }

    /// `z* = (Q + δI)⁻¹(−q)`
    pub fn optimum(&self) -> Vec<f64> {
        let chol = Cholesky::new(&shifted(self.cost.hessian(), self.delta)).expect("Q + δI is positive definite");
        let rhs: Vec<f64> = self.cost.linear().iter().map(|v| -v).collect();
        chol.solve(&rhs)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost.value(x) + 0.5 * self.delta * crate::linalg::dot(x, x)
    }
}

fn shifted(s: &Matrix, shift: f64) -> Matrix {
    let mut m = s.clone();
    for i in 0..m.rows() {
        m[(i, i)] += shift;
    }
    m
}

/// `ζ(ρ, λ) = (ρ² + λδ) / (ρ² + λδ + (λ + δ)ρ)`
pub fn l2_factor(rho: f64, delta: f64, lambda: f64) -> f64 {
    let num = rho * rho + lambda * delta;
    num / (num + (lambda + delta) * rho)
}

/// `ζ_R(α, ρ, λ) = 1 − αρ(λ + δ) / ((ρ + λ)(ρ + δ))`, signed.
pub fn relaxed_l2_factor(alpha: f64, rho: f64, delta: f64, lambda: f64) -> f64 {
    1.0 - alpha * rho * (lambda + delta) / ((rho + lambda) * (rho + delta))
}

/// `max_i ζ(ρ, λ_i)`
pub fn worst_factor(problem: &L2Problem, rho: f64) -> f64 {
    problem
        .eigenvalues()
        .iter()
        .map(|&l| l2_factor(rho, problem.delta, l))
        .fold(0.0, f64::max)
}

/// `max_i |ζ_R(α, ρ, λ_i)|`
pub fn worst_relaxed_factor(problem: &L2Problem, rho: f64, alpha: f64) -> f64 {
    problem
        .eigenvalues()
        .iter()
        .map(|&l| relaxed_l2_factor(alpha, rho, problem.delta, l).abs())
        .fold(0.0, f64::max)
}

/// Open upper bound on α: `2 min_i (λ_i + ρ)(ρ + δ) / (ρ(δ + λ_i))`.
pub fn alpha_upper_bound(problem: &L2Problem, rho: f64) -> f64 {
    let d = problem.delta;
    problem
        .eigenvalues()
        .iter()
        .map(|&l| 2.0 * (l + rho) * (rho + d) / (rho * (d + l)))
        .fold(f64::INFINITY, f64::min)
}

/// `E = (δI + ρ(ρ − δ)(Q + ρI)⁻¹) / (δ + ρ)`
pub fn l2_error_matrix(problem: &L2Problem, rho: f64) -> SymMatrix {
    relaxed_error_matrix(problem, rho, 1.0)
}

/// `E_R = (δI + ρ(α(ρ − δ)(Q + ρI)⁻¹ + (1 − α)I)) / (δ + ρ)`
pub fn relaxed_error_matrix(problem: &L2Problem, rho: f64, alpha: f64) -> SymMatrix {
    let d = problem.delta;
    let inv = Cholesky::new(&shifted(problem.cost.hessian(), rho))
        .expect("Q + ρI is positive definite")
        .inverse();
    let mut e = inv.scale(rho * alpha * (rho - d) / (d + rho));
    let diag = (d + rho * (1.0 - alpha)) / (d + rho);
    for i in 0..e.rows() {
        e[(i, i)] += diag;
    }
    SymMatrix::from_symmetrized(&e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum L2Regime {
    /// δ < λ₁(Q)
    BelowSpectrum,
    /// λ₁(Q) ≤ δ ≤ λₙ(Q)
    InsideSpectrum,
    /// δ > λₙ(Q)
    AboveSpectrum,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub rho_star: f64,
    pub zeta_star: f64,
    pub regime: L2Regime,
    /// Relaxed optimum `(δ, 2)` has factor 0.
    pub relaxed_rho_star: f64,
    pub relaxed_alpha_star: f64,
}

/// Optimal `(ρ*, ζ*)` from δ and the extreme eigenvalues of `Q`.
pub fn tune_l2_spectrum(delta: f64, lam_min: f64, lam_max: f64) -> TuningReport {
    let edge = |l: f64| {
        let rho = (delta * l).sqrt();
        (rho, 1.0 / (1.0 + (delta + l) / (2.0 * rho)))
    };
    let (regime, (rho_star, zeta_star)) = if delta < lam_min {
        (L2Regime::BelowSpectrum, edge(lam_min))
    } else if delta > lam_max {
        (L2Regime::AboveSpectrum, edge(lam_max))
    } else {
        (L2Regime::InsideSpectrum, (delta, 0.5))
    };
    TuningReport {
        rho_star,
        zeta_star,
        regime,
        relaxed_rho_star: delta,
        relaxed_alpha_star: 2.0,
    }
}

pub fn tune_l2(problem: &L2Problem) -> TuningReport {
    tune_l2_spectrum(problem.delta, problem.lam_min(), problem.lam_max())
}

/// Starting point; `x⁰` is not used by the iteration.
#[derive(Clone, Debug, Default)]
pub struct L2Init {
    pub z: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct L2State {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub mu: Vec<f64>,
    pub k: usize,
}

/// One ADMM run. `dual_error[k] = ‖z^k − z*‖`, `x_error[k] = ‖x^k − z*‖`
/// (with `x⁰ := z⁰`).
#[derive(Clone, Debug)]
pub struct L2Trace {
    pub state: L2State,
    pub status: Status,
    /// Index of the first iterate the stop rule accepted.
    pub iterations: usize,
    pub dual_error: Vec<f64>,
    pub x_error: Vec<f64>,
    /// Largest `‖μ^k − δz^k‖` over `k ≥ 1`, relative to `max(1, ‖μ^k‖)`.
    pub mu_identity_gap: f64,
    /// α outside the convergence interval.
    pub alpha_warning: bool,
}

impl L2Trace {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn empirical_factor(&self) -> Option<f64> {
        empirical_factor(&self.dual_error)
    }
}

/// Tail geometric mean of the per-step dual contraction.
pub fn empirical_factor(errors: &[f64]) -> Option<f64> {
    let end = errors
        .iter()
        .position(|&e| e <= FACTOR_TARGET)
        .map_or(errors.len(), |p| p + 1);
    tail_factor(&errors[..end], FACTOR_WINDOW, FACTOR_FLOOR)
}

/// Stateful ADMM iteration for a fixed `(ρ, α)`.
pub struct L2Solver<'a> {
    problem: &'a L2Problem,
    rho: f64,
    alpha: f64,
    chol: Cholesky,
    pub state: L2State,
}

impl<'a> L2Solver<'a> {
    pub fn new(problem: &'a L2Problem, rho: f64, alpha: f64, init: &L2Init) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be > 0, got {rho}")));
        }
        if !(alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
        }
        let n = problem.dim();
        let z = init.z.clone().unwrap_or_else(|| vec![0.0; n]);
        let mu = init.mu.clone().unwrap_or_else(|| vec![0.0; n]);
        if z.len() != n || mu.len() != n {
            return Err(Error::DimensionMismatch(format!("initial z/mu must have length {n}")));
        }
        let chol = Cholesky::new(&shifted(problem.cost.hessian(), rho))?;
        Ok(Self {
            problem,
            rho,
            alpha,
            chol,
            state: L2State {
                x: z.clone(),
                z,
                mu,
                k: 0,
            },
        })
    }

    pub fn step(&mut self) {
        let (rho, alpha, d) = (self.rho, self.alpha, self.problem.delta);
        let s = &mut self.state;
        let rhs: Vec<f64> = (0..s.z.len())
            .map(|i| rho * s.z[i] - s.mu[i] - self.problem.cost.linear()[i])
            .collect();
        let x = self.chol.solve(&rhs);
        for i in 0..x.len() {
            let xh = alpha * x[i] + (1.0 - alpha) * s.z[i];
            let z_new = (s.mu[i] + rho * xh) / (d + rho);
            s.mu[i] += rho * (xh - z_new);
            s.z[i] = z_new;
        }
        s.x = x;
        s.k += 1;
    }
}

/// Runs ADMM until `‖z^{k+1} − z^k‖ ≤ tol · max(1, ‖z^{k+1}‖)` or the cap.
pub fn solve_l2(problem: &L2Problem, rho: f64, alpha: f64, init: &L2Init, stop: StopRule) -> Result<L2Trace> {
    let mut solver = L2Solver::new(problem, rho, alpha, init)?;
    let alpha_warning = !(alpha < alpha_upper_bound(problem, rho));
    let z_star = problem.optimum();
    let mut dual_error = vec![dist(&solver.state.z, &z_star)];
    let mut x_error = vec![dist(&solver.state.x, &z_star)];
    let mut mu_identity_gap: f64 = 0.0;
    let mut status = Status::MaxIterations;
    let mut iterations = stop.max_iter;

    for _ in 0..stop.max_iter {
        let z_prev = solver.state.z.clone();
        solver.step();
        let s = &solver.state;
        let gap: f64 =
            s.mu.iter()
                .zip(&s.z)
                .map(|(m, z)| (m - problem.delta * z).powi(2))
                .sum::<f64>()
                .sqrt();
        mu_identity_gap = mu_identity_gap.max(gap / norm(&s.mu).max(1.0));
        dual_error.push(dist(&s.z, &z_star));
        x_error.push(dist(&s.x, &z_star));
        if !s.z.iter().all(|v| v.is_finite()) || norm(&s.z) > 1e12 {
            status = Status::Diverged;
            iterations = s.k;
            break;
        }
        if dist(&s.z, &z_prev) <= stop.tol * norm(&s.z).max(1.0) {
            status = Status::Converged;
            iterations = s.k - 1;
            break;
        }
    }

    Ok(L2Trace {
        state: solver.state,
        status,
        iterations,
        dual_error,
        x_error,
        mu_identity_gap,
        alpha_warning,
    })
}

/// Hessian bounds `l = λ₁(Q) + δ`, `u = λₙ(Q) + δ` of the regularized cost.
pub fn curvature_bounds(problem: &L2Problem) -> (f64, f64) {
    (problem.lam_min() + problem.delta, problem.lam_max() + problem.delta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
}

pub fn baseline_params(l: f64, u: f64) -> BaselineParams {
    let (sl, su) = (l.sqrt(), u.sqrt());
    BaselineParams {
        gamma: 2.0 / (l + u),
        a: 4.0 / (sl + su).powi(2),
        b: (su - sl).powi(2) / (sl + su).powi(2),
    }
}

/// `(u − l)/(u + l)`
pub fn gradient_factor(l: f64, u: f64) -> f64 {
    (u - l) / (u + l)
}

/// `(√u − √l)/(√u + √l)`
pub fn heavy_ball_factor(l: f64, u: f64) -> f64 {
    let (sl, su) = (l.sqrt(), u.sqrt());
    (su - sl) / (su + sl)
}

/// Error trace of a first-order baseline. `error[k] = ‖x^k − x*‖`.
#[derive(Clone, Debug)]
pub struct BaselineTrace {
    pub x: Vec<f64>,
    pub status: Status,
    pub iterations: usize,
    pub error: Vec<f64>,
}

impl BaselineTrace {
    pub fn empirical_factor(&self) -> Option<f64> {
        empirical_factor(&self.error)
    }
}

fn regularized_gradient(problem: &L2Problem, x: &[f64]) -> Vec<f64> {
    let mut g = problem.cost.gradient(x);
    crate::linalg::axpy(problem.delta, x, &mut g);
    g
}

/// `x⁺ = x − γ∇f(x)` with `γ = 2/(l + u)`.
pub fn baseline_gradient(problem: &L2Problem, x0: Option<&[f64]>, stop: StopRule) -> BaselineTrace {
    let (l, u) = curvature_bounds(problem);
    let p = baseline_params(l, u);
    run_baseline(problem, x0, stop, |x, _prev, g| {
        x.iter().zip(g).map(|(xi, gi)| xi - p.gamma * gi).collect()
    })
}

/// `x⁺ = x − a∇f(x) + b(x − x⁻)` with the optimal `(a, b)`.
pub fn baseline_heavy_ball(problem: &L2Problem, x0: Option<&[f64]>, stop: StopRule) -> BaselineTrace {
    let (l, u) = curvature_bounds(problem);
    let p = baseline_params(l, u);
    run_baseline(problem, x0, stop, |x, prev, g| {
        (0..x.len())
            .map(|i| x[i] - p.a * g[i] + p.b * (x[i] - prev[i]))
            .collect()
    })
}

fn run_baseline(
    problem: &L2Problem,
    x0: Option<&[f64]>,
    stop: StopRule,
    update: impl Fn(&[f64], &[f64], &[f64]) -> Vec<f64>,
) -> BaselineTrace {
    let n = problem.dim();
    let x_star = problem.optimum();
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut prev = x.clone();
    let mut error = vec![dist(&x, &x_star)];
    let mut status = Status::MaxIterations;
    let mut iterations = stop.max_iter;
    for k in 1..=stop.max_iter {
        let g = regularized_gradient(problem, &x);
        let next = update(&x, &prev, &g);
        prev = std::mem::replace(&mut x, next);
        error.push(dist(&x, &x_star));
        if !x.iter().all(|v| v.is_finite()) || norm(&x) > 1e12 {
            status = Status::Diverged;
            iterations = k;
            break;
        }
        if dist(&x, &prev) <= stop.tol * norm(&x).max(1.0) {
            status = Status::Converged;
            iterations = k - 1;
            break;
        }
    }
    BaselineTrace {
        x,
        status,
        iterations,
        error,
    }
}

/// Maps solutions of the transformed problem back to the weighted variables.
#[derive(Clone, Debug)]
pub struct WeightMap {
    p_inv_sqrt: Matrix,
}

impl WeightMap {
    /// `x̄ = P̄^{-1/2} x`
    pub fn map_back(&self, x: &[f64]) -> Vec<f64> {
        self.p_inv_sqrt.mul_vec(x)
    }
}

/// Rewrites `½x̄ᵀQ̄x̄ + q̄ᵀx̄ + (δ/2) z̄ᵀP̄z̄` in the unweighted form with
/// `Q = P̄^{-1/2}Q̄P̄^{-1/2}` and `q = P̄^{-1/2}q̄`.
pub fn weighted_transform(
    q_bar: &SymMatrix,
    q_lin: &[f64],
    p_bar: &SymMatrix,
    delta: f64,
) -> Result<(L2Problem, WeightMap)> {
    if p_bar.dim() != q_bar.dim() {
        return Err(Error::DimensionMismatch("P̄ and Q̄ differ in size".into()));
    }
    Cholesky::new(p_bar)?;
    let e = sym_eig(p_bar);
    let p_inv_sqrt = e.reconstruct_with(|l| 1.0 / l.sqrt()).symmetrized();
    let q_mat = SymMatrix::from_symmetrized(&p_inv_sqrt.matmul(q_bar).matmul(&p_inv_sqrt));
    let q = p_inv_sqrt.mul_vec(q_lin);
    Ok((L2Problem::from_parts(q_mat, q, delta)?, WeightMap { p_inv_sqrt }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag_problem(d: &[f64], q: &[f64], delta: f64) -> L2Problem {
        L2Problem::from_parts(SymMatrix::from_diag(d), q.to_vec(), delta).unwrap()
    }

    #[test]
    fn factor_examples() {
        assert_relative_eq!(l2_factor(1.0, 1.0, 1.0), 0.5);
        assert_relative_eq!(l2_factor(2.0, 1.0, 4.0), 4.0 / 9.0);
        assert_relative_eq!(relaxed_l2_factor(2.0, 3.0, 3.0, 17.0), 0.0, epsilon = 1e-15);
        assert_relative_eq!(relaxed_l2_factor(1.0, 2.0, 1.0, 4.0), l2_factor(2.0, 1.0, 4.0));
    }

    #[test]
    fn relaxed_factor_at_bound_is_minus_one() {
        let (rho, d, l) = (0.7, 2.0, 5.0);
        let bound = 2.0 * (l + rho) * (rho + d) / (rho * (d + l));
        assert_relative_eq!(relaxed_l2_factor(bound, rho, d, l), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn tuning_branches() {
        let t = tune_l2_spectrum(1.0, 4.0, 9.0);
        assert_eq!(t.regime, L2Regime::BelowSpectrum);
        assert_relative_eq!(t.rho_star, 2.0);
        assert_relative_eq!(t.zeta_star, 4.0 / 9.0);
        let t = tune_l2_spectrum(5.0, 4.0, 9.0);
        assert_eq!(t.regime, L2Regime::InsideSpectrum);
        assert_relative_eq!(t.rho_star, 5.0);
        assert_relative_eq!(t.zeta_star, 0.5);
        let t = tune_l2_spectrum(16.0, 4.0, 9.0);
        assert_eq!(t.regime, L2Regime::AboveSpectrum);
        assert_relative_eq!(t.rho_star, 12.0);
        assert_relative_eq!(t.zeta_star, 24.0 / 49.0);
    }

    #[test]
    fn error_matrix_scalar_case() {
        let p = diag_problem(&[3.0, 3.0], &[1.0, 0.0], 0.5);
        let e = l2_error_matrix(&p, 1.3);
        let z = l2_factor(1.3, 0.5, 3.0);
        assert_relative_eq!(e[(0, 0)], z, epsilon = 1e-14);
        assert_relative_eq!(e[(1, 1)], z, epsilon = 1e-14);
        assert_relative_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn small_rho_limit() {
        let p = diag_problem(&[1.0], &[0.0], 1.0);
        assert!((l2_error_matrix(&p, 1e-9)[(0, 0)] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_linear_term_converges_immediately() {
        let p = diag_problem(&[2.0, 5.0], &[0.0, 0.0], 1.0);
        let t = solve_l2(&p, 1.0, 1.0, &L2Init::default(), DEFAULT_STOP).unwrap();
        assert!(t.converged());
        assert_eq!(t.iterations, 0);
    }

    #[test]
    fn remark_first_iterate() {
        let p = diag_problem(&[2.0, 5.0], &[1.0, -2.0], 0.5);
        let mut s = L2Solver::new(&p, 0.5, 1.0, &L2Init::default()).unwrap();
        s.step();
        assert_relative_eq!(s.state.x[0], -1.0 / 2.5);
        assert_relative_eq!(s.state.x[1], 2.0 / 5.5);
    }

    #[test]
    fn one_step_relaxed() {
        let p = diag_problem(&[2.0, 5.0, 40.0], &[1.0, -2.0, 3.0], 0.5);
        let t = solve_l2(&p, 0.5, 2.0, &L2Init::default(), DEFAULT_STOP).unwrap();
        assert!(t.dual_error[1] < 1e-12);
        assert_eq!(t.iterations, 1);
    }

    #[test]
    fn baseline_examples() {
        let b = baseline_params(1.0, 4.0);
        assert_relative_eq!(b.a, 4.0 / 9.0);
        assert_relative_eq!(b.b, 1.0 / 9.0);
        let p = diag_problem(&[1.0, 1.0], &[1.0, 2.0], 1.0);
        let g = baseline_gradient(&p, None, DEFAULT_STOP);
        assert!(g.error[1] < 1e-15);
    }

    #[test]
    fn weighted_scalar_scaling() {
        let (p, map) = weighted_transform(
            &SymMatrix::from_diag(&[8.0, 4.0]),
            &[2.0, 6.0],
            &SymMatrix::from_diag(&[4.0, 4.0]),
            1.0,
        )
        .unwrap();
        assert_relative_eq!(p.eigenvalues()[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(p.eigenvalues()[1], 2.0, epsilon = 1e-14);
        assert_relative_eq!(p.cost().linear()[1], 3.0, epsilon = 1e-14);
        assert_relative_eq!(map.map_back(&[2.0, 0.0])[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_bad_delta() {
        assert!(L2Problem::from_parts(SymMatrix::identity(1), vec![0.0], 0.0).is_err());
    }
}
