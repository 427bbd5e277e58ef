use serde::{Deserialize, Serialize};

use super::eigen::{jacobi_eigen, sym_eig};
use super::factor::Cholesky;
use super::matrix::{Matrix, SymMatrix};
use crate::error::{Error, Result};

/// Which subspace a [`Projector`] maps onto.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subspace {
    /// Column space of some matrix.
    Range,
    /// Null space of `Aᵀ`.
    NullspaceOfTranspose,
}

/// Orthogonal projector onto a subspace.
#[derive(Clone, Debug)]
pub struct Projector {
    pub matrix: Matrix,
    pub subspace: Subspace,
}

impl Projector {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(v)
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.max_abs() == 0.0
    }
}

/// Rank structure of a constraint matrix `A` (m x n).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankCase {
    /// rank = n < m (tall): `Aᵀ` has a nontrivial null space.
    FullColumn,
    /// rank = m < n (wide).
    FullRow,
    /// square and nonsingular.
    Invertible,
}

/// Numerical rank from the eigenvalues of the smaller Gram matrix.
pub fn numerical_rank(a: &Matrix) -> usize {
    let g = if a.rows() <= a.cols() {
        a.matmul(&a.transpose())
    } else {
        a.gram()
    };
    if g.rows() == 0 {
        return 0;
    }
    let e = jacobi_eigen(&g);
    e.nonzero_values().iter().filter(|&&v| v > 0.0).count()
}

pub fn rank_case(a: &Matrix) -> Result<RankCase> {
    let (m, n) = a.shape();
    let rank = numerical_rank(a);
    match () {
        _ if rank == m && rank == n => Ok(RankCase::Invertible),
        _ if rank == m => Ok(RankCase::FullRow),
        _ if rank == n => Ok(RankCase::FullColumn),
        _ => Err(Error::RankDeficient { rows: m, cols: n, rank }),
    }
}

/// The pair `(R, Π_N(Aᵀ))` used to split `z^{k+1} - z^k` into the part
/// recoverable from the dual residual and the part invisible to it.
///
/// * full column rank: `R = A (AᵀA)⁻¹`, `Π = I - A (AᵀA)⁻¹ Aᵀ`
/// * full row rank:    `R = (AAᵀ)⁻¹ A`, `Π = 0`
/// * invertible:       `R = A⁻ᵀ` (the full-row-rank formula), `Π = 0`
#[derive(Clone, Debug)]
pub struct ResidualProjectors {
    pub case: RankCase,
    pub r: Matrix,
    pub null_proj: Projector,
}

pub fn projectors(a: &Matrix) -> Result<ResidualProjectors> {
    let case = rank_case(a)?;
    let m = a.rows();
    let (r, null_matrix) = match case {
        RankCase::FullColumn => {
            let chol = Cholesky::new(&a.gram())?;
            // R = A (AᵀA)⁻¹ ; rows of R solve (AᵀA) r_iᵀ = a_iᵀ
            let mut r = Matrix::zeros(m, a.cols());
            for i in 0..m {
                let ri = chol.solve(a.row(i));
                r.row_mut(i).copy_from_slice(&ri);
            }
            let range = r.matmul(&a.transpose());
            (r, Matrix::identity(m).sub(&range).symmetrized())
        }
        RankCase::FullRow | RankCase::Invertible => {
            let chol = Cholesky::new(&a.matmul(&a.transpose()))?;
            (chol.solve_matrix(a), Matrix::zeros(m, m))
        }
    };
    Ok(ResidualProjectors {
        case,
        r,
        null_proj: Projector {
            matrix: null_matrix,
            subspace: Subspace::NullspaceOfTranspose,
        },
    })
}

/// Orthogonal projector onto the column space of `v`, built from the
/// eigenvectors of `v vᵀ` with nonzero eigenvalues. Dependent columns are fine.
pub fn range_projector(v: &Matrix) -> Projector {
    let e = jacobi_eigen(&v.matmul(&v.transpose()));
    let keep = e.nonzero_indices();
    let n = v.rows();
    let mut p = Matrix::zeros(n, n);
    for k in keep {
        let u = e.vector(k);
        for i in 0..n {
            for j in 0..n {
                p[(i, j)] += u[i] * u[j];
            }
        }
    }
    Projector {
        matrix: p,
        subspace: Subspace::Range,
    }
}

/// Outcome of the fixed-point convergence test for `x ← T x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointReport {
    pub converges: bool,
    /// Spectral radius of `T - Π_Range(V)`.
    pub factor: f64,
}

/// Tests whether `x ← T x` converges to the projection of `x⁰` onto the
/// 1-eigenspace spanned by the columns of `V`.
pub fn fixed_point_check(t: &SymMatrix, v: &Matrix) -> Result<FixedPointReport> {
    if v.rows() != t.dim() {
        return Err(Error::DimensionMismatch(format!(
            "V has {} rows, T is {}x{}",
            v.rows(),
            t.dim(),
            t.dim()
        )));
    }
    let tv = t.matmul(v);
    let gap = tv.sub(v).max_abs();
    if gap > 1e-8 * v.max_abs().max(1.0) {
        return Err(Error::NotFixed(gap));
    }
    let pi = range_projector(v);
    let diff = SymMatrix::from_symmetrized(&t.sub(&pi.matrix));
    let e = sym_eig(&diff);
    let factor = e.values.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    Ok(FixedPointReport {
        converges: factor < 1.0,
        factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_is_invertible_case() {
        let p = projectors(&Matrix::identity(3)).unwrap();
        assert_eq!(p.case, RankCase::Invertible);
        assert_eq!(p.r, Matrix::identity(3));
        assert!(p.null_proj.is_zero());
    }

    #[test]
    fn tall_column_case() {
        let a = Matrix::from_rows(&[[1.0], [1.0]]);
        let p = projectors(&a).unwrap();
        assert_eq!(p.case, RankCase::FullColumn);
        assert_relative_eq!(p.r[(0, 0)], 0.5);
        assert_relative_eq!(p.r[(1, 0)], 0.5);
        let pi = &p.null_proj.matrix;
        assert_relative_eq!(pi[(0, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(pi[(0, 1)], -0.5, epsilon = 1e-15);
        let pi2 = pi.matmul(pi);
        assert!(pi2.sub(pi).max_abs() < 1e-14);
    }

    #[test]
    fn wide_row_case() {
        let a = Matrix::from_rows(&[[1.0, 0.0]]);
        let p = projectors(&a).unwrap();
        assert_eq!(p.case, RankCase::FullRow);
        assert_eq!(p.r, a);
        assert!(p.null_proj.is_zero());
    }

    #[test]
    fn rank_deficient_both_ways_rejected() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 0.0]]);
        match projectors(&a) {
            Err(Error::RankDeficient { rank, .. }) => assert_eq!(rank, 1),
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn fixed_point_examples() {
        let t = SymMatrix::from_diag(&[1.0, 0.5]);
        let r = fixed_point_check(&t, &Matrix::column(&[1.0, 0.0])).unwrap();
        assert!(r.converges);
        assert_relative_eq!(r.factor, 0.5);

        let r = fixed_point_check(&SymMatrix::identity(2), &Matrix::identity(2)).unwrap();
        assert!(r.converges);
        assert_relative_eq!(r.factor, 0.0);

        let t = SymMatrix::from_diag(&[1.0, 1.2]);
        let r = fixed_point_check(&t, &Matrix::column(&[1.0, 0.0])).unwrap();
        assert!(!r.converges);
        assert_relative_eq!(r.factor, 1.2);
    }

    #[test]
    fn fixed_point_rejects_non_eigenvector() {
        let t = SymMatrix::from_diag(&[1.0, 0.5]);
        assert!(matches!(
            fixed_point_check(&t, &Matrix::column(&[0.0, 1.0])),
            Err(Error::NotFixed(_))
        ));
    }
}
