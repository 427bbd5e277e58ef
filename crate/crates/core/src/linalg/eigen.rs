//! Cyclic Jacobi eigendecomposition for dense symmetric matrices.

use super::matrix::{Matrix, SymMatrix};
use crate::error::{Error, Result};

/// Sweeps are capped; cyclic Jacobi converges quadratically, so this is only
/// reached on pathological input.
const MAX_SWEEPS: usize = 100;
/// Off-diagonal Frobenius norm target, relative to `‖S‖_F`.
const OFF_DIAG_TOL: f64 = 1e-12;

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomp {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.col(i)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }

    /// Threshold below which an eigenvalue counts as zero: `1e-10` times the
    /// largest magnitude.
    pub fn zero_threshold(&self) -> f64 {
        let scale = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        super::RANK_TOL * scale
    }

    /// Eigenvalues above the zero threshold, ascending.
    pub fn nonzero_values(&self) -> Vec<f64> {
        let tol = self.zero_threshold();
        self.values.iter().copied().filter(|v| v.abs() > tol).collect()
    }

    /// Indices of eigenvalues above the zero threshold.
    pub fn nonzero_indices(&self) -> Vec<usize> {
        let tol = self.zero_threshold();
        (0..self.values.len()).filter(|&i| self.values[i].abs() > tol).collect()
    }

    /// `V diag(f(λ)) Vᵀ`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.dim();
        let mut out = Matrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = self.vectors[(i, k)] * w;
                if vik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vik * self.vectors[(j, k)];
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_with(|l| l)
    }
}

/// Eigendecomposition of a symmetric matrix.
pub fn sym_eig(s: &SymMatrix) -> EigenDecomp {
    jacobi_eigen(s.as_matrix())
}

/// Like [`sym_eig`], but validates symmetry of a raw matrix first.
pub fn sym_eig_checked(m: &Matrix) -> Result<EigenDecomp> {
    let s = SymMatrix::new(m.clone())?;
    if s.dim() == 0 {
        return Err(Error::DimensionMismatch("empty matrix".into()));
    }
    Ok(sym_eig(&s))
}

/// Cyclic Jacobi on a matrix assumed symmetric (only the upper triangle
/// drives the rotations).
pub(crate) fn jacobi_eigen(m: &Matrix) -> EigenDecomp {
    let n = m.rows();
    let mut a = m.symmetrized();
    let mut v = Matrix::identity(n);
    let target = OFF_DIAG_TOL * m.norm_fro();

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    EigenDecomp { values, vectors }
}
