use super::EconometricsError;

/// Durbin–Watson over residuals stacked by country; `groups` labels each
/// residual's country and must be contiguous. Differences never cross a
/// country boundary.
pub fn durbin_watson(residuals: &[f64], groups: &[usize]) -> Result<f64, EconometricsError> {
    if residuals.len() != groups.len() || residuals.len() < 2 {
        return Err(EconometricsError::TooFewResiduals);
    }
    let mut num = 0.0;
    let mut run = 1;
    for i in 1..residuals.len() {
        if groups[i] == groups[i - 1] {
            let d = residuals[i] - residuals[i - 1];
            num += d * d;
            run += 1;
        } else {
            if run < 2 {
                return Err(EconometricsError::TooFewResiduals);
            }
            run = 1;
        }
    }
    if run < 2 {
        return Err(EconometricsError::TooFewResiduals);
    }
    let den: f64 = residuals.iter().map(|e| e * e).sum();
    if den == 0.0 {
        return Err(EconometricsError::DegenerateVariance);
    }
    Ok(num / den)
}

/// 1 − (SSR/(n − k)) / (SST/(n − 1)), SST about the mean of `y`.
pub fn adjusted_r2(residuals: &[f64], y: &[f64], n_params: usize) -> Result<f64, EconometricsError> {
    let n = y.len();
    if n <= n_params + 1 || residuals.len() != n {
        return Err(EconometricsError::InsufficientObservations { n_obs: n, n_params });
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if sst == 0.0 {
        return Err(EconometricsError::DegenerateVariance);
    }
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    Ok(1.0 - (ssr / (n - n_params) as f64) / (sst / (n - 1) as f64))
}
