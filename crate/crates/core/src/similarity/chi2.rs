use crate::error::{Error, Result};

/// Chi-square statistic `sum_k (a_k - b_k)^2 / (a_k + b_k)`, skipping bins
/// where both histograms are empty.
pub fn chi2_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "histograms of dimension {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(chi2_unchecked(a, b))
}

#[inline]
pub(crate) fn chi2_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        let s = x + y;
        if s > 0.0 {
            let d = x - y;
            sum += d * d / s;
        }
    }
    sum
}

/// `exp(-gamma * chi2(a, b))`.
pub fn chi2_kernel(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "chi-square bandwidth must be positive, got {gamma}"
        )));
    }
    Ok((-gamma * chi2_statistic(a, b)?).exp())
}
