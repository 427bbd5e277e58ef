use super::matrix::{Matrix, SymMatrix};
use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = S`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(s: &Matrix) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Cholesky needs a square matrix, got {}x{}",
                s.rows(),
                s.cols()
            )));
        }
        let n = s.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = s[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut v = s[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    /// Solves `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            let mut v = y[i];
            for k in 0..i {
                v -= row[k] * y[k];
            }
            y[i] = v / row[i];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn backward(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in (i + 1)..n {
                v -= self.l[(k, i)] * x[k];
            }
            x[i] = v / self.l[(i, i)];
        }
        x
    }

    /// Solves `S x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim());
        self.backward(&self.forward(b))
    }

    /// `S⁻¹ B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        let cols: Vec<Vec<f64>> = (0..b.cols()).map(|j| self.solve(&b.col(j))).collect();
        Matrix::from_columns(&cols)
    }

    pub fn inverse(&self) -> SymMatrix {
        SymMatrix::from_symmetrized(&self.solve_matrix(&Matrix::identity(self.dim())))
    }
}

/// Returns `R_q` with `R_q R_qᵀ = Q⁻¹`.
///
/// With `Q = L Lᵀ`, `Q⁻¹ = L⁻ᵀ L⁻¹`, so `R_q = L⁻ᵀ` (upper triangular).
pub fn chol_inv_factor(q: &SymMatrix) -> Result<Matrix> {
    let chol = Cholesky::new(q)?;
    let n = chol.dim();
    let mut r = Matrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        // column j of L⁻ᵀ solves Lᵀ x = e_j
        let col = chol.backward(&e);
        for (i, v) in col.into_iter().enumerate() {
            r[(i, j)] = v;
        }
    }
    Ok(r)
}

/// LU factorization with partial pivoting, for general square systems.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .expect("nonempty pivot range");
            if pv <= 1e-14 * scale {
                return Err(Error::Singular);
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[(i, k)] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                x[i] -= self.lu[(i, k)] * x[k];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.lu.rows();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                self.solve(&e)
            })
            .collect();
        Matrix::from_columns(&cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_factor_is_identity() {
        let r = chol_inv_factor(&SymMatrix::identity(3)).unwrap();
        assert_eq!(r, Matrix::identity(3));
    }

    #[test]
    fn scalar_factor() {
        let r = chol_inv_factor(&SymMatrix::from_diag(&[4.0])).unwrap();
        assert_relative_eq!(r[(0, 0)], 0.5);
    }

    #[test]
    fn rejects_indefinite() {
        let q = SymMatrix::new(Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]])).unwrap();
        assert!(matches!(
            chol_inv_factor(&q),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }

    #[test]
    fn lu_solves_permuted_system() {
        let a = Matrix::from_rows(&[[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]]);
        let lu = Lu::new(&a).unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]);
        let back = a.mul_vec(&x);
        for (b, e) in back.iter().zip([3.0, 2.0, 4.0]) {
            assert_relative_eq!(*b, e, epsilon = 1e-12);
        }
        assert!(Lu::new(&Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]])).is_err());
    }
}
