//! Dense linear algebra: matrices, factorizations, symmetric eigensolver and
//! projector utilities.

mod eigen;
mod factor;
mod matrix;
mod projector;

pub use eigen::{sym_eig, sym_eig_checked, EigenDecomp};
pub use factor::{chol_inv_factor, Cholesky, Lu};
pub use matrix::{Matrix, SymMatrix};
pub use projector::{
    fixed_point_check, numerical_rank, projectors, range_projector, rank_case, FixedPointReport, Projector, RankCase,
    ResidualProjectors, Subspace,
};

/// Eigenvalues below `RANK_TOL * max|λ|` count as zero.
pub const RANK_TOL: f64 = 1e-10;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scaled(s: f64, a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
