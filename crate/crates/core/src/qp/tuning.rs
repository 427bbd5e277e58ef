use serde::{Deserialize, Serialize};

use super::{QpProblem, QpSpectral};
use crate::error::Result;
use crate::linalg::{Cholesky, SymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpTuning {
    pub rho_star: f64,
    pub alpha_star: f64,
    pub zeta_star: f64,
    /// Set when λ₁ is the smallest nonzero eigenvalue of a singular `AQ⁻¹Aᵀ`.
    pub heuristic: bool,
}

/// `ρ* = 1/√(λ₁λₙ)`, `ζ* = λₙ/(λₙ + √(λ₁λₙ))`.
pub fn tune_qp(spectral: &QpSpectral) -> QpTuning {
    let (l1, ln) = (spectral.lam_min_nonzero, spectral.lam_max);
    let g = (l1 * ln).sqrt();
    QpTuning {
        rho_star: 1.0 / g,
        alpha_star: 1.0,
        zeta_star: ln / (ln + g),
        heuristic: spectral.heuristic(),
    }
}

/// Same `ρ*`, `α* = 2`, `ζ_R* = (λₙ − √(λ₁λₙ))/(λₙ + √(λ₁λₙ))`.
pub fn tune_qp_relaxed(spectral: &QpSpectral) -> QpTuning {
    let (l1, ln) = (spectral.lam_min_nonzero, spectral.lam_max);
    let g = (l1 * ln).sqrt();
    QpTuning {
        rho_star: 1.0 / g,
        alpha_star: 2.0,
        zeta_star: (ln - g) / (ln + g),
        heuristic: spectral.heuristic(),
    }
}

/// `λ(M) = ρλ/(1 + ρλ)`
pub fn m_eigenvalue(rho: f64, lambda: f64) -> f64 {
    rho * lambda / (1.0 + rho * lambda)
}

/// `ζ_R(ρ, α, λ) = α|ρλ/(1 + ρλ) − ½| + 1 − α/2`
pub fn factor_at(rho: f64, alpha: f64, lambda: f64) -> f64 {
    alpha * (m_eigenvalue(rho, lambda) - 0.5).abs() + 1.0 - 0.5 * alpha
}

/// Worst case of [`factor_at`] over the nonzero spectrum. The inner term is
/// monotone in λ, so the extremes suffice.
pub fn theoretical_factor(rho: f64, alpha: f64, spectral: &QpSpectral) -> f64 {
    factor_at(rho, alpha, spectral.lam_min_nonzero).max(factor_at(rho, alpha, spectral.lam_max))
}

/// Piecewise form at α = 1: `1/(1 + ρλ₁)` for `ρ ≤ ρ*`, else `ρλₙ/(1 + ρλₙ)`.
pub fn piecewise_factor(rho: f64, spectral: &QpSpectral) -> f64 {
    if rho <= tune_qp(spectral).rho_star {
        1.0 / (1.0 + rho * spectral.lam_min_nonzero)
    } else {
        m_eigenvalue(rho, spectral.lam_max)
    }
}

/// `M = Ā(Q/ρ + ĀᵀĀ)⁻¹Āᵀ` with `Ā = LA`.
pub fn compute_m(problem: &QpProblem, rho: f64, l: Option<&[f64]>) -> Result<SymMatrix> {
    let (a, _) = problem.scaled(l);
    let mut k = problem.cost().hessian().scale(1.0 / rho).add(&a.gram());
    k = k.symmetrized();
    let chol = Cholesky::new(&k)?;
    let x = chol.solve_matrix(&a.transpose());
    Ok(SymMatrix::from_symmetrized(&a.matmul(&x)))
}

/// `½‖2M − I‖ + ½`, with the norm taken over the nonzero eigenspace of `M`
/// when `restricted`.
pub fn fv_contraction_bound(m: &SymMatrix, restricted: bool) -> f64 {
    let e = crate::linalg::sym_eig(m);
    let vals: Vec<f64> = if restricted {
        e.nonzero_values()
    } else {
        e.values.clone()
    };
    let norm = vals.iter().map(|l| (2.0 * l - 1.0).abs()).fold(0.0, f64::max);
    0.5 * norm + 0.5
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activity {
    AllInactive,
    AllActive,
}

/// Finite surrogates for the `ρ → 0` and `ρ → ∞` limits.
pub const EXTREME_RHO_FACTOR: f64 = 1e4;

/// `(10⁻⁴ρ*, 1)` when no constraint is active, `(10⁴ρ*, 1)` when all are.
pub fn extreme_case_advisor(activity: Activity, spectral: &QpSpectral) -> (f64, f64) {
    let rho = tune_qp(spectral).rho_star;
    match activity {
        Activity::AllInactive => (rho / EXTREME_RHO_FACTOR, 1.0),
        Activity::AllActive => (rho * EXTREME_RHO_FACTOR, 1.0),
    }
}

/// `Q⁻¹` helper for callers building `AQ⁻¹Aᵀ` by hand.
pub fn q_inverse(q: &SymMatrix) -> Result<SymMatrix> {
    Ok(Cholesky::new(q)?.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sym_eig, Matrix, RankCase};
    use approx::assert_relative_eq;

    fn spec(l1: f64, ln: f64) -> QpSpectral {
        QpSpectral {
            lam_min_nonzero: l1,
            lam_max: ln,
            nullity: 0,
            rank_case: RankCase::FullRow,
            nonzero: vec![l1, ln],
        }
    }

    #[test]
    fn tuning_examples() {
        let t = tune_qp(&spec(1.0, 4.0));
        assert_relative_eq!(t.rho_star, 0.5);
        assert_relative_eq!(t.zeta_star, 2.0 / 3.0);
        let r = tune_qp_relaxed(&spec(1.0, 4.0));
        assert_relative_eq!(r.zeta_star, 1.0 / 3.0);
        assert_relative_eq!(r.zeta_star, 2.0 * t.zeta_star - 1.0, epsilon = 1e-15);
        let t = tune_qp(&spec(3.0, 3.0));
        assert_relative_eq!(t.rho_star, 1.0 / 3.0);
        assert_relative_eq!(t.zeta_star, 0.5);
        assert_relative_eq!(tune_qp_relaxed(&spec(3.0, 3.0)).zeta_star, 0.0);
    }

    #[test]
    fn factor_examples() {
        assert_relative_eq!(factor_at(1.0, 1.0, 1.0), 0.5);
        let (rho, l) = (0.3, 2.0);
        assert_relative_eq!(
            factor_at(rho, 2.0, l),
            (2.0 * rho * l / (1.0 + rho * l) - 1.0).abs(),
            epsilon = 1e-15
        );
        let s = spec(1.0, 9.0);
        for rho in [0.05, 0.2, 1.0 / 3.0, 0.5, 3.0] {
            assert_relative_eq!(
                piecewise_factor(rho, &s),
                theoretical_factor(rho, 1.0, &s),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn m_of_identity() {
        let p = QpProblem::from_parts(SymMatrix::identity(2), vec![0.0; 2], Matrix::identity(2), vec![0.0; 2]).unwrap();
        let m = compute_m(&p, 1.0, None).unwrap();
        assert_relative_eq!(m[(0, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(m[(0, 1)], 0.0);
        let big = compute_m(&p, 1e8, None).unwrap();
        assert!(sym_eig(&big).values.iter().all(|v| (v - 1.0).abs() < 1e-7));
    }

    #[test]
    fn advisor_surrogates() {
        let s = spec(1.0, 4.0);
        assert_eq!(extreme_case_advisor(Activity::AllInactive, &s), (0.5e-4, 1.0));
        assert_eq!(extreme_case_advisor(Activity::AllActive, &s), (0.5e4, 1.0));
    }
}
