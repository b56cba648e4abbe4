use super::FhsError;

fn autocovariances(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (0..=max_lag)
        .map(|k| {
            x[k..]
                .iter()
                .zip(x)
                .map(|(a, b)| (a - m) * (b - m))
                .sum::<f64>()
                / n
        })
        .collect()
}

fn check_length(x: &[f64], max_lag: usize) -> Result<(), FhsError> {
    if x.len() <= max_lag + 1 {
        return Err(FhsError::SeriesTooShort {
            needed: max_lag + 2,
            found: x.len(),
        });
    }
    Ok(())
}

/// Sample autocorrelations for lags `0..=max_lag` (`acf[0] = 1`), using the
/// biased `1/T` autocovariance estimator.
pub fn acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>, FhsError> {
    check_length(x, max_lag)?;
    let g = autocovariances(x, max_lag);
    if !(g[0] > 0.0) {
        return Err(FhsError::DegenerateSeries);
    }
    Ok(g.iter().map(|v| v / g[0]).collect())
}

/// Partial autocorrelations for lags `1..=max_lag` by Durbin-Levinson;
/// `pacf[m-1]` is the lag-`m` value.
pub fn pacf(x: &[f64], max_lag: usize) -> Result<Vec<f64>, FhsError> {
    let r = acf(x, max_lag)?;
    let mut out = Vec::with_capacity(max_lag);
    let mut phi: Vec<f64> = Vec::with_capacity(max_lag);
    let mut v = 1.0;
    for m in 1..=max_lag {
        let num = r[m] - (1..m).map(|k| phi[k - 1] * r[m - k]).sum::<f64>();
        let kappa = num / v;
        let prev = phi.clone();
        for k in 1..m {
            phi[k - 1] = prev[k - 1] - kappa * prev[m - k - 1];
        }
        phi.push(kappa);
        v *= 1.0 - kappa * kappa;
        out.push(kappa);
    }
    Ok(out)
}
