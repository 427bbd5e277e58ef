use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SymMatrix};

/// Quadratic objective `½ xᵀQx + qᵀx` with `Q` positive definite.
#[derive(Clone, Debug)]
pub struct QuadCost {
    q_mat: SymMatrix,
    q: Vec<f64>,
}

impl QuadCost {
    pub fn new(q_mat: SymMatrix, q: Vec<f64>) -> Result<Self> {
        if q.len() != q_mat.dim() {
            return Err(Error::DimensionMismatch(format!(
                "Q is {}x{} but q has length {}",
                q_mat.dim(),
                q_mat.dim(),
                q.len()
            )));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Cholesky::new(&q_mat)?;
        Ok(Self { q_mat, q })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn hessian(&self) -> &SymMatrix {
        &self.q_mat
    }

    pub fn linear(&self) -> &[f64] {
        &self.q
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let qx = self.q_mat.mul_vec(x);
        0.5 * crate::linalg::dot(x, &qx) + crate::linalg::dot(&self.q, x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.q_mat.mul_vec(x);
        crate::linalg::axpy(1.0, &self.q, &mut g);
        g
    }
}

/// How an iteration ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIterations,
    /// Iterate norm exceeded the divergence guard.
    Diverged,
}

/// Tolerance and iteration cap shared by all solvers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub tol: f64,
    pub max_iter: usize,
}

impl StopRule {
    pub const fn new(tol: f64, max_iter: usize) -> Self {
        Self { tol, max_iter }
    }
}
