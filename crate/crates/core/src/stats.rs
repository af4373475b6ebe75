//! Batch-means helpers. Each realization of the environment is one batch.

/// Standard error of the mean of `values`; infinite with fewer than two.
pub fn mean_standard_error(values: &[f64]) -> f64 {
    let m = values.len();
    if m < 2 {
        return f64::INFINITY;
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (var / m as f64).sqrt()
}

/// Delta-method standard error of `Σ num / Σ den` over paired batches.
pub fn ratio_standard_error(num: &[f64], den: &[f64]) -> f64 {
    let m = num.len();
    if m < 2 {
        return f64::INFINITY;
    }
    let den_sum: f64 = den.iter().sum();
    if den_sum == 0.0 {
        return f64::INFINITY;
    }
    let ratio = num.iter().sum::<f64>() / den_sum;
    let var = num
        .iter()
        .zip(den)
        .map(|(n, d)| (n - ratio * d).powi(2))
        .sum::<f64>()
        / (m - 1) as f64;
    let den_mean = den_sum / m as f64;
    (var / m as f64).sqrt() / den_mean
}
