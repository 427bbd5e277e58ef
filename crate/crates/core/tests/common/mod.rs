//! Instance generators and independent oracles shared by integration tests.
#![allow(dead_code)]

use admm_tune::linalg::{Matrix, SymMatrix};
use admm_tune::qp::QpProblem;
use admm_tune::random::{gaussian_matrix, gaussian_vec, spd};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Slow-convergence instance with two box rows and one oblique row.
pub fn slow_instance() -> QpProblem {
    QpProblem::from_parts(
        SymMatrix::new(Matrix::from_rows(&[[40.513, 0.069], [0.069, 40.389]])).unwrap(),
        vec![0.0, 0.0],
        Matrix::from_rows(&[[-1.0, 0.0], [0.0, -1.0], [0.1151, 0.9934]]),
        vec![6.0, 6.0, -0.3422],
    )
    .unwrap()
}

/// Wide QP (m ≤ n, full row rank) with an optimum that activates some rows.
/// Draws that are numerically rank deficient, which happens for square `A`,
/// are redrawn.
pub fn wide_qp<R: Rng>(rng: &mut R, n: usize, m: usize, cond: f64) -> QpProblem {
    loop {
        let q = spd(rng, n, 1.0, cond);
        let a = gaussian_matrix(rng, m, n);
        // c shifted so that the unconstrained minimizer violates about half the rows.
        let q_lin = gaussian_vec(rng, n);
        let c: Vec<f64> = gaussian_vec(rng, m).iter().map(|v| 0.5 * v).collect();
        match QpProblem::from_parts(q, q_lin, a, c) {
            Err(admm_tune::Error::RankDeficient { .. }) => continue,
            other => return other.unwrap(),
        }
    }
}

/// Square invertible QP.
pub fn square_qp<R: Rng>(rng: &mut R, n: usize, cond: f64) -> QpProblem {
    wide_qp(rng, n, n, cond)
}

/// Determinant by cofactor expansion along the first row.
pub fn cofactor_det(a: &Matrix) -> f64 {
    let n = a.rows();
    if n == 1 {
        return a[(0, 0)];
    }
    (0..n)
        .map(|j| {
            let minor_rows: Vec<Vec<f64>> = (1..n)
                .map(|i| (0..n).filter(|&c| c != j).map(|c| a[(i, c)]).collect())
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * a[(0, j)] * cofactor_det(&Matrix::from_rows(&minor_rows))
        })
        .sum()
}

/// Number of eigenvalues below `x`: negative pivots of `S − xI` (Sylvester).
fn count_below(s: &Matrix, x: f64) -> usize {
    let n = s.rows();
    let mut a = s.clone();
    for i in 0..n {
        a[(i, i)] -= x;
    }
    let mut negatives = 0;
    for k in 0..n {
        let mut p = a[(k, k)];
        if p == 0.0 {
            p = -1e-300;
        }
        if p < 0.0 {
            negatives += 1;
        }
        for i in k + 1..n {
            let f = a[(i, k)] / p;
            for j in k + 1..n {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    negatives
}

/// Eigenvalues by bisection on the characteristic polynomial's sign changes,
/// counted through the inertia of `S − xI`.
pub fn bisection_eigenvalues(s: &Matrix) -> Vec<f64> {
    let n = s.rows();
    let radius = (0..n)
        .map(|i| s.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    (0..n)
        .map(|k| {
            let (mut lo, mut hi) = (-radius, radius);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if count_below(s, mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}

pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize) -> SymMatrix {
    let g = gaussian_matrix(rng, n, n);
    SymMatrix::from_symmetrized(&g.add(&g.transpose()).scale(0.5))
}
