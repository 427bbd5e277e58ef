//! Seeded random instance generators.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{dot, Matrix, SymMatrix};

pub fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_row_major(rows, cols, gaussian_vec(rng, rows * cols)).expect("shape matches data")
}

/// Haar-like orthogonal matrix from Gram-Schmidt on Gaussian columns.
pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v = gaussian_vec(rng, n);
        for c in &cols {
            let p = dot(c, &v);
            v.iter_mut().zip(c).for_each(|(v, c)| *v -= p * c);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            cols.push(v.iter().map(|v| v / norm).collect());
        }
    }
    Matrix::from_columns(&cols)
}

/// `VΛVᵀ` with random orthogonal `V`.
pub fn spd_with_spectrum<R: Rng + ?Sized>(rng: &mut R, eigenvalues: &[f64]) -> SymMatrix {
    let v = orthogonal(rng, eigenvalues.len());
    SymMatrix::from_symmetrized(&v.scale_cols(eigenvalues).matmul(&v.transpose()))
}

/// `n` eigenvalues log-spaced on `[lo, hi]`, endpoints included.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    // Base 10 keeps decade points exact.
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

/// SPD matrix with spectrum log-spaced on `[lo, hi]`.
pub fn spd<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> SymMatrix {
    spd_with_spectrum(rng, &log_spaced(lo, hi, n))
}
