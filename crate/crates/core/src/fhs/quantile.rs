use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::FhsError;
use crate::par::{self, Execution};
use crate::series::TimeSeries;

/// Forecast quantiles, one column per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileSeries {
    pub dates: Vec<NaiveDate>,
    pub alphas: Vec<f64>,
    /// `values[a][t]` is the level-`alphas[a]` quantile on `dates[t]`.
    pub values: Vec<Vec<f64>>,
}

impl QuantileSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn level(&self, alpha: f64) -> Option<&[f64]> {
        self.alphas
            .iter()
            .position(|a| (a - alpha).abs() < 1e-12)
            .map(|i| self.values[i].as_slice())
    }

    /// Same quantiles on the last `n` dates.
    pub fn tail(&self, n: usize) -> QuantileSeries {
        let from = self.len() - n.min(self.len());
        QuantileSeries {
            dates: self.dates[from..].to_vec(),
            alphas: self.alphas.clone(),
            values: self.values.iter().map(|v| v[from..].to_vec()).collect(),
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), FhsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FhsError::InvalidParameter(format!("alpha = {alpha} not in (0, 1)")));
    }
    Ok(())
}

/// Quantile of an ascending sample at plotting position `α·(L+1)`, linear
/// between order statistics and clamped to the sample range.
pub fn empirical_quantile(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let p = alpha * (n + 1) as f64;
    if p <= 1.0 {
        return sorted[0];
    }
    if p >= n as f64 {
        return sorted[n - 1];
    }
    let k = p.floor() as usize;
    let frac = p - k as f64;
    sorted[k - 1] + frac * (sorted[k] - sorted[k - 1])
}

/// Quantiles of the `window` observations before each date, starting at
/// index `window`.
pub fn rolling_quantile(
    x: &TimeSeries,
    window: usize,
    alphas: &[f64],
) -> Result<QuantileSeries, FhsError> {
    rolling_quantile_with(x, window, alphas, Execution::default())
}

pub fn rolling_quantile_with(
    x: &TimeSeries,
    window: usize,
    alphas: &[f64],
    exec: Execution,
) -> Result<QuantileSeries, FhsError> {
    for &a in alphas {
        check_alpha(a)?;
    }
    if window == 0 || x.len() <= window {
        return Err(FhsError::InsufficientHistory {
            window,
            available: x.len(),
        });
    }
    let n_out = x.len() - window;
    let rows = par::map_range(exec, n_out, |i| {
        let mut w = x.values[i..i + window].to_vec();
        w.sort_by(f64::total_cmp);
        alphas.iter().map(|&a| empirical_quantile(&w, a)).collect::<Vec<f64>>()
    });
    Ok(QuantileSeries {
        dates: x.dates[window..].to_vec(),
        alphas: alphas.to_vec(),
        values: (0..alphas.len())
            .map(|a| rows.iter().map(|r| r[a]).collect())
            .collect(),
    })
}

/// Rolling quantiles of the devolatized residuals scaled by the day's `σ`.
pub fn forecast_residual_quantile(
    devol: &TimeSeries,
    vol: &TimeSeries,
    window: usize,
    alphas: &[f64],
    exec: Execution,
) -> Result<QuantileSeries, FhsError> {
    if devol.dates != vol.dates {
        return Err(FhsError::DateMisalignment);
    }
    let mut q = rolling_quantile_with(devol, window, alphas, exec)?;
    let sigma = &vol.values[window..];
    for col in &mut q.values {
        for (v, s) in col.iter_mut().zip(sigma) {
            *v *= s;
        }
    }
    Ok(q)
}

/// `β·ξ(t−1) + ε̂(t)` on the dates of `residual_q`.
pub fn forecast_xi_quantile(
    xi: &TimeSeries,
    beta: f64,
    residual_q: &QuantileSeries,
) -> Result<QuantileSeries, FhsError> {
    let first = residual_q.dates.first().ok_or(FhsError::DateMisalignment)?;
    let start = xi.position(*first).ok_or(FhsError::DateMisalignment)?;
    if start == 0 && beta != 0.0 {
        return Err(FhsError::DateMisalignment);
    }
    if xi.dates.get(start..start + residual_q.len()) != Some(&residual_q.dates[..]) {
        return Err(FhsError::DateMisalignment);
    }
    let values = residual_q
        .values
        .iter()
        .map(|col| {
            col.iter()
                .enumerate()
                .map(|(i, e)| if beta == 0.0 { *e } else { beta * xi.values[start + i - 1] + e })
                .collect()
        })
        .collect();
    Ok(QuantileSeries {
        dates: residual_q.dates.clone(),
        alphas: residual_q.alphas.clone(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_to(n: usize) -> Vec<f64> {
        (1..=n).map(|i| i as f64).collect()
    }

    #[test]
    fn convention_examples() {
        let s = one_to(100);
        assert!((empirical_quantile(&s, 0.5) - 50.5).abs() < 1e-12);
        assert!((empirical_quantile(&s, 0.01) - 1.01).abs() < 1e-12);
        assert_eq!(empirical_quantile(&s, 0.001), 1.0);
        assert_eq!(empirical_quantile(&s, 0.999), 100.0);
        assert_eq!(empirical_quantile(&[4.0; 7], 0.3), 4.0);
    }

    #[test]
    fn rolling_uses_previous_window_only() {
        let mut v = one_to(100);
        v.push(-1e9);
        v.push(0.0);
        let x = TimeSeries::from_values(v);
        let q = rolling_quantile_with(&x, 100, &[0.01, 0.5], Execution::Sequential).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q.dates[0], x.dates[100]);
        assert!((q.values[0][0] - 1.01).abs() < 1e-12);
        assert!((q.values[1][0] - 50.5).abs() < 1e-12);
        assert!(q.values[0][1] < -1e8);
    }

    #[test]
    fn insufficient_history() {
        let x = TimeSeries::from_values(vec![0.0; 5]);
        assert!(matches!(rolling_quantile(&x, 5, &[0.5]), Err(FhsError::InsufficientHistory { .. })));
        assert!(matches!(rolling_quantile(&x, 2, &[1.0]), Err(FhsError::InvalidParameter(_))));
    }

    #[test]
    fn revolatized() {
        let devol = TimeSeries::from_values(vec![-1.5, -1.5, -1.5, 0.0]);
        let vol = TimeSeries::new(devol.dates.clone(), vec![1.0, 1.0, 1.0, 2.0]);
        let q = forecast_residual_quantile(&devol, &vol, 3, &[0.2], Execution::Sequential).unwrap();
        assert_eq!(q.values[0], vec![-3.0]);
    }

    #[test]
    fn unit_vol_is_plain_historical_simulation() {
        let e = TimeSeries::from_values((0..50).map(|i| ((i * 37) % 11) as f64 - 5.0).collect());
        let vol = TimeSeries::new(e.dates.clone(), vec![1.0; 50]);
        let fhs = forecast_residual_quantile(&e, &vol, 20, &[0.1, 0.9], Execution::Sequential).unwrap();
        let hs = rolling_quantile(&e, 20, &[0.1, 0.9]).unwrap();
        assert_eq!(fhs, hs);
    }

    #[test]
    fn xi_forecast() {
        let xi = TimeSeries::from_values(vec![0.0, 1.0, 5.0]);
        let rq = QuantileSeries {
            dates: xi.dates[2..].to_vec(),
            alphas: vec![0.01],
            values: vec![vec![-2.0]],
        };
        let q = forecast_xi_quantile(&xi, 0.2, &rq).unwrap();
        assert!((q.values[0][0] + 1.8).abs() < 1e-15);
        assert_eq!(forecast_xi_quantile(&xi, 0.0, &rq).unwrap(), rq);

        let stray = QuantileSeries {
            dates: vec![NaiveDate::from_ymd_opt(1990, 1, 1).unwrap()],
            ..rq
        };
        assert_eq!(forecast_xi_quantile(&xi, 0.2, &stray), Err(FhsError::DateMisalignment));
    }

    #[test]
    fn level_lookup_and_tail() {
        let q = QuantileSeries {
            dates: TimeSeries::from_values(vec![0.0; 3]).dates,
            alphas: vec![0.01, 0.99],
            values: vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]],
        };
        assert_eq!(q.level(0.99), Some(&[4.0, 5.0, 6.0][..]));
        assert_eq!(q.level(0.5), None);
        assert_eq!(q.tail(2).values, vec![vec![2.0, 3.0], vec![5.0, 6.0]]);
    }
}
