//! Small numeric helpers shared by the test statistics.

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Variance with divisor `len`.
pub(crate) fn population_variance(values: &[f64]) -> f64 {
    let mu = mean(values);
    values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / values.len() as f64
}

/// Variance with divisor `len - 1`.
pub(crate) fn sample_variance(values: &[f64]) -> f64 {
    let mu = mean(values);
    values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (values.len() - 1) as f64
}

/// `numerator / scale`, with the signed-infinity convention when `scale == 0`:
/// `0` if the numerator is zero, otherwise `±∞` following its sign.
pub fn studentized_ratio(numerator: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        numerator / scale
    } else if numerator > 0.0 {
        f64::INFINITY
    } else if numerator < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}
