//! Small numeric helpers shared across modules.

/// Mean of a slice (0.0 for empty input).
pub(crate) fn mean(data: &[f64]) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    data.iter().sum::<f64>() / data.len() as f64
}

/// Sample standard deviation (N-1 normalization, matching MATLAB's `std`).
/// Returns 0.0 for fewer than two values.
pub(crate) fn sample_std(data: &[f64]) -> f64 {
    let n = data.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(data);
    let ss: f64 = data.iter().map(|&x| (x - m) * (x - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Mean and sample standard deviation in one pass pair.
pub(crate) fn mean_std(data: &[f64]) -> (f64, f64) {
    (mean(data), sample_std(data))
}
