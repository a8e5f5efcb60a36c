//! Ensemble error metrics.

/// Root mean square of the given errors; zero for an empty slice.
pub fn rmse(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

/// Empirical CDF as `(error level, fraction at or below)` pairs, one per
/// sample, sorted by error. Monotone nondecreasing and ending at 1.
pub fn empirical_cdf(errors: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, e)| (e, (i + 1) as f64 / n))
        .collect()
}

/// Fraction of samples at or below `level` on a CDF produced by
/// [`empirical_cdf`].
pub fn cdf_at(cdf: &[(f64, f64)], level: f64) -> f64 {
    cdf.iter()
        .rev()
        .find(|(e, _)| *e <= level)
        .map(|(_, f)| *f)
        .unwrap_or(0.0)
}
