use crate::error::{Error, Result};

/// Variance of the mean of `x` from non-overlapping batch means, using
/// `⌊√n⌋` batches. Returns `n · Var(mean)`, the spectral density at zero.
pub fn batch_means_variance(x: &[f64]) -> f64 {
    let n = x.len();
    let b = ((n as f64).sqrt().floor() as usize).max(2);
    let m = n / b;
    if m == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = (0..b)
        .map(|i| x[i * m..(i + 1) * m].iter().sum::<f64>() / m as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let var_means = means.iter().map(|a| (a - grand).powi(2)).sum::<f64>() / (b - 1) as f64;
    m as f64 * var_means
}

/// Geweke convergence z-score comparing the first `first_frac` of a trace
/// with its last `last_frac`.
pub fn geweke_z(trace: &[f64], first_frac: f64, last_frac: f64) -> Result<f64> {
    if trace.len() < 100 {
        return Err(Error::Diagnostic(format!(
            "trace of length {} is too short (need at least 100)",
            trace.len()
        )));
    }
    if !(first_frac > 0.0 && last_frac > 0.0 && first_frac + last_frac <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "segment fractions {first_frac} and {last_frac} must be positive and sum to at most 1"
        )));
    }
    let n = trace.len();
    let na = ((first_frac * n as f64).floor() as usize).max(4);
    let nb = ((last_frac * n as f64).floor() as usize).max(4);
    let a = &trace[..na];
    let b = &trace[n - nb..];
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let denom = batch_means_variance(a) / na as f64 + batch_means_variance(b) / nb as f64;
    if !(denom > 0.0) {
        return Err(Error::Diagnostic("trace has zero variance".into()));
    }
    Ok((mean(a) - mean(b)) / denom.sqrt())
}

/// [`geweke_z`] with the conventional 10% / 50% split.
pub fn geweke_z_default(trace: &[f64]) -> Result<f64> {
    geweke_z(trace, 0.1, 0.5)
}
