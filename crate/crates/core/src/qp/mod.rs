//! ADMM for inequality-constrained QP
//!
//! ```text
//! minimize ½ xᵀQx + qᵀx   subject to  Ax ≤ c
//! ```
//!
//! split as `Ax + z = c`, `z ≥ 0`, with scaled dual `u`.

mod solver;
mod tuning;

pub use solver::*;
pub use tuning::*;

use serde::{Deserialize, Serialize};

use crate::cost::QuadCost;
use crate::error::{Error, Result};
use crate::linalg::{chol_inv_factor, rank_case, sym_eig, Matrix, RankCase, SymMatrix};

#[derive(Clone, Debug)]
pub struct QpProblem {
    cost: QuadCost,
    a: Matrix,
    c: Vec<f64>,
    case: RankCase,
}

impl QpProblem {
    pub fn new(cost: QuadCost, a: Matrix, c: Vec<f64>) -> Result<Self> {
        if a.cols() != cost.dim() || a.rows() != c.len() {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, Q is {}x{}, c has length {}",
                a.rows(),
                a.cols(),
                cost.dim(),
                cost.dim(),
                c.len()
            )));
        }
        if !a.is_finite() || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let case = rank_case(&a)?;
        Ok(Self { cost, a, c, case })
    }

    pub fn from_parts(q_mat: SymMatrix, q: Vec<f64>, a: Matrix, c: Vec<f64>) -> Result<Self> {
        Self::new(QuadCost::new(q_mat, q)?, a, c)
    }

    pub fn cost(&self) -> &QuadCost {
        &self.cost
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn rank_case(&self) -> RankCase {
        self.case
    }

    /// Same cost, new right-hand side.
    pub fn with_rhs(&self, c: Vec<f64>) -> Result<Self> {
        if c.len() != self.m() {
            return Err(Error::DimensionMismatch("c length changed".into()));
        }
        Ok(Self { c, ..self.clone() })
    }

    /// `(LA, Lc)` for a diagonal scaling `L`; identity when `None`.
    pub fn scaled(&self, l: Option<&[f64]>) -> (Matrix, Vec<f64>) {
        match l {
            None => (self.a.clone(), self.c.clone()),
            Some(l) => (self.a.scale_rows(l), self.c.iter().zip(l).map(|(c, l)| c * l).collect()),
        }
    }
}

/// Extreme nonzero eigenvalues of `LAQ⁻¹AᵀL`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QpSpectral {
    pub lam_min_nonzero: f64,
    pub lam_max: f64,
    /// Zero eigenvalues of `LAQ⁻¹AᵀL`, i.e. `dim N(Aᵀ)`.
    pub nullity: usize,
    pub rank_case: RankCase,
    /// Nonzero eigenvalues, ascending.
    pub nonzero: Vec<f64>,
}

impl QpSpectral {
    pub fn compute(problem: &QpProblem, l: Option<&[f64]>) -> Result<Self> {
        let (a, _) = problem.scaled(l);
        let k = schur_matrix(problem.cost.hessian(), &a)?;
        let e = sym_eig(&k);
        let nonzero: Vec<f64> = e.nonzero_values().into_iter().filter(|v| *v > 0.0).collect();
        if nonzero.is_empty() {
            return Err(Error::InvalidParameter("AQ⁻¹Aᵀ is zero".into()));
        }
        Ok(Self {
            lam_min_nonzero: nonzero[0],
            lam_max: *nonzero.last().unwrap(),
            nullity: problem.m() - nonzero.len(),
            rank_case: problem.case,
            nonzero,
        })
    }

    /// Tuning from the smallest nonzero eigenvalue is a heuristic when
    /// `Aᵀ` has a null space.
    pub fn heuristic(&self) -> bool {
        self.nullity > 0
    }

    pub fn ratio(&self) -> f64 {
        self.lam_max / self.lam_min_nonzero
    }
}

/// `AQ⁻¹Aᵀ` computed as `(AR_q)(AR_q)ᵀ` with `R_q R_qᵀ = Q⁻¹`.
pub fn schur_matrix(q: &SymMatrix, a: &Matrix) -> Result<SymMatrix> {
    let ar = a.matmul(&chol_inv_factor(q)?);
    Ok(SymMatrix::from_symmetrized(&ar.matmul(&ar.transpose())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spectral_of_identity() {
        let p = QpProblem::from_parts(
            SymMatrix::from_diag(&[1.0, 4.0]),
            vec![0.0; 2],
            Matrix::identity(2),
            vec![1.0; 2],
        )
        .unwrap();
        let s = QpSpectral::compute(&p, None).unwrap();
        assert_relative_eq!(s.lam_min_nonzero, 0.25);
        assert_relative_eq!(s.lam_max, 1.0);
        assert_eq!(s.nullity, 0);
    }

    #[test]
    fn tall_a_has_nullity() {
        let a = Matrix::from_rows(&[[1.0], [1.0], [2.0]]);
        let p = QpProblem::from_parts(SymMatrix::identity(1), vec![0.0], a, vec![1.0; 3]).unwrap();
        let s = QpSpectral::compute(&p, None).unwrap();
        assert_eq!(s.nullity, 2);
        assert!(s.heuristic());
        assert_relative_eq!(s.lam_max, 6.0, epsilon = 1e-12);
    }
}
