//! Empirical convergence-factor estimators.

/// Geometric mean of the last `window` step ratios `e[k+1]/e[k]`, taken over
/// the prefix of `series` whose entries stay above `floor`.
///
/// Returns `None` when fewer than one ratio is available.
pub fn tail_factor(series: &[f64], window: usize, floor: f64) -> Option<f64> {
    let end = series.iter().position(|&e| !(e > floor)).unwrap_or(series.len());
    let prefix = &series[..end];
    if prefix.len() < 2 || window == 0 {
        return None;
    }
    let ratios: Vec<f64> = prefix.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len().saturating_sub(window)..];
    let log_mean = tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64;
    Some(log_mean.exp())
}

/// First index at which `series` is at or below `eps`.
pub fn iterations_to(series: &[f64], eps: f64) -> Option<usize> {
    series.iter().position(|&e| e <= eps)
}
