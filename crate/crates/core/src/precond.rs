//! Optimal diagonal constraint scaling.
//!
//! With `R_q R_qᵀ = Q⁻¹`, `B = AR_q` and `S(w) = BᵀWB`, the nonzero spectrum of
//! `LAQ⁻¹AᵀL` (`L = W^{1/2}`) equals that of `S(w)`. The scaling minimizing
//! their ratio solves
//!
//! ```text
//! minimize t   subject to  tI − S(w) ⪰ 0,  Pᵀ(S(w) − I)P ⪰ 0,  w > 0
//! ```
//!
//! where the columns of `P` span `Range(Bᵀ)`. It is solved with a log-barrier
//! interior-point method in `(t, w)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{chol_inv_factor, dot, sym_eig, Cholesky, Matrix, SymMatrix};
use crate::qp::schur_matrix;

pub const W_MIN: f64 = 1e-6;
pub const W_MAX: f64 = 1e6;
/// Barrier weight growth per outer iteration.
const BARRIER_GROWTH: f64 = 8.0;
const MAX_NEWTON: usize = 80;
/// Stop once the barrier gap bound falls below this fraction of `t`.
const GAP_TOL: f64 = 1e-10;

/// Ratio of the largest to smallest nonzero eigenvalue of `LAQ⁻¹AᵀL`.
pub fn nonzero_eig_ratio(q: &SymMatrix, a: &Matrix, w: &[f64]) -> Result<f64> {
    check_weights(a, w)?;
    let l: Vec<f64> = w.iter().map(|w| w.sqrt()).collect();
    let k = schur_matrix(q, &a.scale_rows(&l))?;
    let nz = sym_eig(&k).nonzero_values();
    match (nz.first(), nz.last()) {
        (Some(lo), Some(hi)) => Ok(hi / lo),
        _ => Err(Error::InvalidParameter("AQ⁻¹Aᵀ has no nonzero eigenvalue".into())),
    }
}

fn check_weights(a: &Matrix, w: &[f64]) -> Result<()> {
    if w.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} rows",
            w.len(),
            a.rows()
        )));
    }
    if w.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter("weights must be positive".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    /// Diagonal of `W`, normalized so the smallest nonzero eigenvalue is 1.
    pub w: Vec<f64>,
    /// Diagonal of `L = W^{1/2}`.
    pub l: Vec<f64>,
    /// Largest eigenvalue of `S(w)` at the returned `w`.
    pub t_star: f64,
    pub ratio_before: f64,
    pub ratio_after: f64,
    /// No `w` better than the unscaled problem was found.
    pub stagnated: bool,
    /// Newton steps taken.
    pub newton_steps: usize,
}

/// `B = AR_q` and the rows of `BP`.
struct Geometry {
    b: Matrix,
    c: Matrix,
}

impl Geometry {
    fn new(q: &SymMatrix, a: &Matrix) -> Result<Self> {
        let b = a.matmul(&chol_inv_factor(q)?);
        let e = sym_eig(&SymMatrix::from_symmetrized(&b.gram()));
        let cols: Vec<Vec<f64>> = e.nonzero_indices().into_iter().map(|i| e.vector(i)).collect();
        if cols.is_empty() {
            return Err(Error::InvalidParameter("A is zero".into()));
        }
        let c = b.matmul(&Matrix::from_columns(&cols));
        Ok(Self { b, c })
    }

    fn m(&self) -> usize {
        self.b.rows()
    }

    /// `Σ w_i r_i r_iᵀ` over the rows `r_i` of `rows`.
    fn weighted_gram(rows: &Matrix, w: &[f64]) -> Matrix {
        rows.transpose().matmul(&rows.scale_rows(w))
    }

    /// `(λ_max(S), λ_min(PᵀSP))`
    fn extremes(&self, w: &[f64]) -> (f64, f64) {
        let s = sym_eig(&SymMatrix::from_symmetrized(&Self::weighted_gram(&self.b, w)));
        let t = sym_eig(&SymMatrix::from_symmetrized(&Self::weighted_gram(&self.c, w)));
        (s.max(), t.min())
    }
}

/// Barrier `τt − log det(tI − S) − log det(PᵀSP − I) − Σ log w_i`; `None`
/// outside the domain.
fn barrier(geo: &Geometry, tau: f64, t: f64, w: &[f64]) -> Option<f64> {
    if w.iter().any(|w| !(*w > 0.0)) {
        return None;
    }
    let mut g1 = Geometry::weighted_gram(&geo.b, w).scale(-1.0);
    for i in 0..g1.rows() {
        g1[(i, i)] += t;
    }
    let mut g2 = Geometry::weighted_gram(&geo.c, w);
    for i in 0..g2.rows() {
        g2[(i, i)] -= 1.0;
    }
    let l1 = Cholesky::new(&g1.symmetrized()).ok()?;
    let l2 = Cholesky::new(&g2.symmetrized()).ok()?;
    let logdet = |c: &Cholesky| 2.0 * c.lower().diag().iter().map(|d| d.ln()).sum::<f64>();
    Some(tau * t - logdet(&l1) - logdet(&l2) - w.iter().map(|w| w.ln()).sum::<f64>())
}

/// Gradient and Hessian of [`barrier`] in `x = (t, w)`.
fn newton_system(geo: &Geometry, tau: f64, t: f64, w: &[f64]) -> Option<(Vec<f64>, Matrix)> {
    let m = geo.m();
    let mut g1 = Geometry::weighted_gram(&geo.b, w).scale(-1.0);
    for i in 0..g1.rows() {
        g1[(i, i)] += t;
    }
    let mut g2 = Geometry::weighted_gram(&geo.c, w);
    for i in 0..g2.rows() {
        g2[(i, i)] -= 1.0;
    }
    let g1_inv = Cholesky::new(&g1.symmetrized()).ok()?.inverse();
    let g2_inv = Cholesky::new(&g2.symmetrized()).ok()?.inverse();
    // Rows of B G1⁻¹, C G2⁻¹ and B G1⁻².
    let bg = geo.b.matmul(&g1_inv);
    let cg = geo.c.matmul(&g2_inv);
    let bgg = bg.matmul(&g1_inv);
    let kb = bg.matmul(&geo.b.transpose());
    let kc = cg.matmul(&geo.c.transpose());

    let mut grad = vec![0.0; m + 1];
    let mut hess = Matrix::zeros(m + 1, m + 1);
    grad[0] = tau - g1_inv.trace();
    hess[(0, 0)] = g1_inv.matmul(&g1_inv).trace();
    for i in 0..m {
        grad[i + 1] = kb[(i, i)] - kc[(i, i)] - 1.0 / w[i];
        let cross = -dot(bgg.row(i), geo.b.row(i));
        hess[(0, i + 1)] = cross;
        hess[(i + 1, 0)] = cross;
        for j in 0..m {
            hess[(i + 1, j + 1)] = kb[(i, j)].powi(2) + kc[(i, j)].powi(2);
        }
        hess[(i + 1, i + 1)] += 1.0 / (w[i] * w[i]);
    }
    Some((grad, hess))
}

/// Rescales `w` so the smallest nonzero eigenvalue of `S(w)` is 1.
fn normalize(geo: &Geometry, w: &[f64]) -> (Vec<f64>, f64) {
    let (hi, lo) = geo.extremes(w);
    (w.iter().map(|v| v / lo).collect(), hi / lo)
}

/// Diagonal `W` minimizing the nonzero eigenvalue ratio of `LAQ⁻¹AᵀL`.
/// Falls back to `W = I` (flagged `stagnated`) if no improvement is found.
pub fn optimal_scaling(q: &SymMatrix, a: &Matrix) -> Result<ScalingResult> {
    if a.cols() != q.dim() {
        return Err(Error::DimensionMismatch("A and Q disagree on n".into()));
    }
    crate::linalg::rank_case(a)?;
    let geo = Geometry::new(q, a)?;
    let m = geo.m();
    let (ones, ratio_before) = normalize(&geo, &vec![1.0; m]);

    // Strictly feasible start: λ_min(PᵀSP) = 2, t above λ_max(S).
    let mut w: Vec<f64> = ones.iter().map(|v| 2.0 * v).collect();
    let mut t = 2.0 * ratio_before + 1.0;
    let barrier_count = (geo.b.cols() + geo.c.cols() + m) as f64;
    let mut tau = barrier_count / t;
    let mut newton_steps = 0;

    while barrier_count / tau > GAP_TOL * t {
        for _ in 0..MAX_NEWTON {
            let Some((grad, hess)) = newton_system(&geo, tau, t, &w) else {
                break;
            };
            let Ok(chol) = Cholesky::new(&hess.symmetrized()) else {
                break;
            };
            let step: Vec<f64> = chol.solve(&grad).iter().map(|v| -v).collect();
            let decrement = -dot(&grad, &step);
            if decrement < 1e-12 {
                break;
            }
            newton_steps += 1;
            let f0 = barrier(&geo, tau, t, &w).expect("iterate stays interior");
            let mut s = 1.0;
            loop {
                let t_new = t + s * step[0];
                let w_new: Vec<f64> = (0..m).map(|i| w[i] + s * step[i + 1]).collect();
                if let Some(f) = barrier(&geo, tau, t_new, &w_new) {
                    if f <= f0 - 0.25 * s * decrement {
                        t = t_new;
                        w = w_new;
                        break;
                    }
                }
                s *= 0.5;
                if s < 1e-16 {
                    break;
                }
            }
            if s < 1e-16 {
                break;
            }
        }
        tau *= BARRIER_GROWTH;
    }

    let w: Vec<f64> = w.iter().map(|v| v.clamp(W_MIN, W_MAX)).collect();
    let (mut best_w, mut best_ratio) = normalize(&geo, &w);
    let stagnated = !(best_ratio < ratio_before);
    if stagnated {
        best_w = ones;
        best_ratio = ratio_before;
    }
    let (t_star, _) = geo.extremes(&best_w);
    Ok(ScalingResult {
        l: best_w.iter().map(|w| w.sqrt()).collect(),
        t_star,
        ratio_before,
        ratio_after: best_ratio,
        stagnated,
        newton_steps,
        w: best_w,
    })
}

/// Brute-force oracle: `w₁ = 1` and a log grid over `[lo, hi]` for the rest.
/// Intended for `m ≤ 3`.
pub fn grid_search_ratio(q: &SymMatrix, a: &Matrix, lo: f64, hi: f64, points: usize) -> Result<(f64, Vec<f64>)> {
    let m = a.rows();
    if !(1..=3).contains(&m) {
        return Err(Error::InvalidParameter("grid oracle supports m ≤ 3".into()));
    }
    let grid: Vec<f64> = (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
        .collect();
    let mut best = (f64::INFINITY, vec![1.0; m]);
    let mut visit = |w: Vec<f64>| -> Result<()> {
        let r = nonzero_eig_ratio(q, a, &w)?;
        if r < best.0 {
            best = (r, w);
        }
        Ok(())
    };
    match m {
        1 => visit(vec![1.0])?,
        2 => {
            for &g in &grid {
                visit(vec![1.0, g])?;
            }
        }
        _ => {
            for &g in &grid {
                for &h in &grid {
                    visit(vec![1.0, g, h])?;
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn orthogonal_a_needs_no_scaling() {
        let (c, s) = (0.6, 0.8);
        let a = Matrix::from_rows(&[[c, -s], [s, c]]);
        let r = optimal_scaling(&SymMatrix::identity(2), &a).unwrap();
        assert_relative_eq!(r.ratio_before, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.ratio_after, 1.0, epsilon = 1e-12);
        assert!(r.w.iter().all(|w| (w - 1.0).abs() < 1e-10));
    }

    #[test]
    fn diagonal_a_inverts_row_norms() {
        let a = Matrix::from_diag(&[1.0, 10.0]);
        let r = optimal_scaling(&SymMatrix::identity(2), &a).unwrap();
        assert_relative_eq!(r.ratio_before, 100.0, epsilon = 1e-9);
        assert!(r.ratio_after < 1.0 + 1e-6, "{}", r.ratio_after);
        assert_relative_eq!(r.w[1] / r.w[0], 0.01, epsilon = 1e-6);
    }

    #[test]
    fn ratio_examples() {
        let q = SymMatrix::from_diag(&[1.0, 4.0]);
        let i = Matrix::identity(2);
        assert_relative_eq!(nonzero_eig_ratio(&q, &i, &[1.0, 1.0]).unwrap(), 4.0, epsilon = 1e-12);
        let a = Matrix::from_rows(&[[1.0, 2.0], [0.5, -1.0], [3.0, 1.0]]);
        let r1 = nonzero_eig_ratio(&q, &a, &[1.0, 2.0, 0.5]).unwrap();
        let r7 = nonzero_eig_ratio(&q, &a, &[7.0, 14.0, 3.5]).unwrap();
        assert_relative_eq!(r1, r7, epsilon = 1e-10);
        assert!(r1.is_finite());
    }
}
