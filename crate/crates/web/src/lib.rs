//! Browser bindings: analytic convergence-factor curves and live residual
//! traces. Every export is a thin wrapper over a plain Rust function so the
//! numbers can be tested natively.

// `!(x > 0.0)` is how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use admm_tune::fast::{solve_qp_fast, FastOptions};
use admm_tune::l2reg::{gradient_factor, heavy_ball_factor, l2_factor, tune_l2_spectrum};
use admm_tune::qp::{factor_at, solve_qp, QpInit, QpParams, QpProblem, QpSpectral, SolveOptions};
use admm_tune::random::{gaussian_matrix, gaussian_vec, log_spaced, spd};
use admm_tune::StopRule;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

/// Named series sharing one x axis.
#[wasm_bindgen]
#[derive(Clone, Debug, Default)]
pub struct Curves {
    x: Vec<f64>,
    names: Vec<String>,
    series: Vec<Vec<f64>>,
    /// Step size or δ worth marking on the plot; NaN when none.
    marker: f64,
}

#[wasm_bindgen]
impl Curves {
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    pub fn count(&self) -> usize {
        self.series.len()
    }

    pub fn name(&self, i: usize) -> String {
        self.names.get(i).cloned().unwrap_or_default()
    }

    pub fn series(&self, i: usize) -> Vec<f64> {
        self.series.get(i).cloned().unwrap_or_default()
    }

    pub fn marker(&self) -> f64 {
        self.marker
    }
}

impl Curves {
    fn push(&mut self, name: &str, values: Vec<f64>) {
        self.names.push(name.to_owned());
        self.series.push(values);
    }
}

fn check_spectrum(lam_min: f64, lam_max: f64) -> Result<(), JsError> {
    if lam_min > 0.0 && lam_max >= lam_min && lam_max.is_finite() {
        Ok(())
    } else {
        Err(JsError::new("need 0 < λ_min ≤ λ_max"))
    }
}

/// Worst-case ℓ2 factors over `λ ∈ [lam_min, lam_max]` as δ sweeps a log grid.
/// ADMM at `ρ = δ` is flat at ½ while the gradient baselines degrade as δ
/// shrinks relative to the spectrum.
pub fn l2_curves(lam_min: f64, lam_max: f64, delta_lo: f64, delta_hi: f64, points: usize) -> Curves {
    let deltas = log_spaced(delta_lo, delta_hi, points.max(2));
    let worst = |rho: f64, d: f64| l2_factor(rho, d, lam_min).max(l2_factor(rho, d, lam_max));
    let mut c = Curves {
        marker: f64::NAN,
        ..Default::default()
    };
    c.push("ADMM, ρ = δ", deltas.iter().map(|&d| worst(d, d)).collect());
    c.push(
        "ADMM, ρ*",
        deltas
            .iter()
            .map(|&d| tune_l2_spectrum(d, lam_min, lam_max).zeta_star)
            .collect(),
    );
    c.push(
        "gradient",
        deltas
            .iter()
            .map(|&d| gradient_factor(lam_min + d, lam_max + d))
            .collect(),
    );
    c.push(
        "heavy ball",
        deltas
            .iter()
            .map(|&d| heavy_ball_factor(lam_min + d, lam_max + d))
            .collect(),
    );
    c.x = deltas;
    c
}

/// QP factor `max(ζ(ρ, α, λ₁), ζ(ρ, α, λₙ))` over a ρ grid for each α.
/// The marker is `ρ* = 1/√(λ₁λₙ)`.
pub fn qp_curves(lam_min: f64, lam_max: f64, alphas: &[f64], rho_lo: f64, rho_hi: f64, points: usize) -> Curves {
    let rhos = log_spaced(rho_lo, rho_hi, points.max(2));
    let mut c = Curves {
        marker: 1.0 / (lam_min * lam_max).sqrt(),
        ..Default::default()
    };
    for &alpha in alphas {
        let values = rhos
            .iter()
            .map(|&r| factor_at(r, alpha, lam_min).max(factor_at(r, alpha, lam_max)))
            .collect();
        c.push(&format!("α = {alpha}"), values);
    }
    c.x = rhos;
    c
}

/// Random QP with `Q` spectrum on `[1, cond]`, Gaussian `A` and a slack
/// right-hand side, so some rows end active and some do not.
pub fn random_qp(n: usize, m: usize, cond: f64, seed: u64) -> admm_tune::Result<QpProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = spd(&mut rng, n, 1.0, cond);
    let a = gaussian_matrix(&mut rng, m, n);
    let q_lin = gaussian_vec(&mut rng, n);
    let c = gaussian_vec(&mut rng, m).iter().map(|v| 0.5 * v).collect();
    QpProblem::from_parts(q, q_lin, a, c)
}

/// `max(‖r‖, ‖s‖)` per iteration for tuned ADMM, tuned relaxed ADMM, ADMM at
/// `ρ = 1` and fast ADMM at `ρ = 1`. The x axis is the iteration index.
pub fn qp_traces(p: &QpProblem, tol: f64, max_iter: usize) -> admm_tune::Result<Curves> {
    let stop = StopRule::new(tol, max_iter);
    let rho_star = {
        let s = QpSpectral::compute(p, None)?;
        1.0 / (s.lam_min_nonzero * s.lam_max).sqrt()
    };
    let init = QpInit::default();
    let combined = |steps: &[admm_tune::qp::StepRecord]| steps.iter().map(|s| s.combined()).collect::<Vec<_>>();
    let mut c = Curves {
        marker: rho_star,
        ..Default::default()
    };
    for (name, rho, alpha) in [
        ("ADMM, ρ*", rho_star, 1.0),
        ("relaxed, ρ*, α = 2", rho_star, 2.0),
        ("ADMM, ρ = 1", 1.0, 1.0),
    ] {
        let run = solve_qp(p, &QpParams::new(rho, alpha), &init, stop, SolveOptions::FAST)?;
        c.push(name, combined(&run.trace.steps));
    }
    let fast = solve_qp_fast(p, 1.0, None, &init, stop, FastOptions::default(), SolveOptions::FAST)?;
    c.push("fast ADMM, ρ = 1", combined(&fast.run.trace.steps));
    let longest = c.series.iter().map(Vec::len).max().unwrap_or(0);
    c.x = (1..=longest).map(|k| k as f64).collect();
    Ok(c)
}

#[wasm_bindgen(js_name = l2Curves)]
pub fn l2_curves_js(
    lam_min: f64,
    lam_max: f64,
    delta_lo: f64,
    delta_hi: f64,
    points: usize,
) -> Result<Curves, JsError> {
    check_spectrum(lam_min, lam_max)?;
    check_spectrum(delta_lo, delta_hi)?;
    Ok(l2_curves(lam_min, lam_max, delta_lo, delta_hi, points))
}

#[wasm_bindgen(js_name = qpCurves)]
pub fn qp_curves_js(
    lam_min: f64,
    lam_max: f64,
    alphas: Vec<f64>,
    rho_lo: f64,
    rho_hi: f64,
    points: usize,
) -> Result<Curves, JsError> {
    check_spectrum(lam_min, lam_max)?;
    check_spectrum(rho_lo, rho_hi)?;
    if alphas.iter().any(|a| !(*a > 0.0 && *a <= 2.0)) {
        return Err(JsError::new("α must lie in (0, 2]"));
    }
    Ok(qp_curves(lam_min, lam_max, &alphas, rho_lo, rho_hi, points))
}

#[wasm_bindgen(js_name = qpTraces)]
pub fn qp_traces_js(n: usize, m: usize, cond: f64, seed: u64, tol: f64, max_iter: usize) -> Result<Curves, JsError> {
    if n == 0 || m == 0 || n > 200 || m > 200 || !(cond >= 1.0) || !(tol > 0.0) {
        return Err(JsError::new("need 1 ≤ n, m ≤ 200, cond ≥ 1 and tol > 0"));
    }
    let p = random_qp(n, m, cond, seed).map_err(|e| JsError::new(&e.to_string()))?;
    qp_traces(&p, tol, max_iter.min(20_000)).map_err(|e| JsError::new(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admm_at_delta_is_one_half_everywhere() {
        let c = l2_curves(0.1, 10.0, 1e-3, 1e3, 13);
        assert_eq!(c.count(), 4);
        assert!(c.series(0).iter().all(|z| (z - 0.5).abs() < 1e-12));
        // ρ* is never worse than ρ = δ.
        assert!(c.series(1).iter().zip(c.series(0)).all(|(a, b)| *a <= b + 1e-12));
    }

    #[test]
    fn qp_curve_minimum_sits_at_the_marker() {
        let c = qp_curves(0.5, 8.0, &[1.0], 1e-3, 1e3, 601);
        let s = c.series(0);
        let best = (0..s.len()).min_by(|&i, &j| s[i].total_cmp(&s[j])).unwrap();
        assert!((c.x()[best] / c.marker()).ln().abs() < 0.02);
        let zeta_star = 8.0 / (8.0 + (0.5f64 * 8.0).sqrt());
        assert!((s[best] - zeta_star).abs() < 1e-3);
    }

    #[test]
    fn traces_end_below_tolerance() {
        let p = random_qp(10, 5, 30.0, 3).unwrap();
        let c = qp_traces(&p, 1e-6, 20_000).unwrap();
        assert_eq!(c.count(), 4);
        for i in 0..c.count() {
            assert!(*c.series(i).last().unwrap() <= 1e-6, "{}", c.name(i));
        }
        assert_eq!(c.x().len(), (0..4).map(|i| c.series(i).len()).max().unwrap());
    }
}
