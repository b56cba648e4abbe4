use serde::{Deserialize, Serialize};

use super::FhsError;
use crate::series::TimeSeries;

pub const MIN_AR_LENGTH: usize = 10;

/// No-intercept AR(1) model `x(t) = β·x(t−1) + ε(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub beta: f64,
    pub fitted_on: String,
}

impl ArModel {
    /// The model used when the AR filter is switched off.
    pub fn none() -> Self {
        Self {
            beta: 0.0,
            fitted_on: String::new(),
        }
    }
}

/// Least-squares `β = Σ x(t)x(t−1) / Σ x(t−1)²`.
pub fn fit_ar1(x: &[f64], id: &str) -> Result<ArModel, FhsError> {
    if x.len() < MIN_AR_LENGTH {
        return Err(FhsError::SeriesTooShort {
            needed: MIN_AR_LENGTH,
            found: x.len(),
        });
    }
    let num: f64 = x.windows(2).map(|w| w[1] * w[0]).sum();
    let den: f64 = x[..x.len() - 1].iter().map(|v| v * v).sum();
    if !(den > 0.0) {
        return Err(FhsError::DegenerateSeries);
    }
    let beta = num / den;
    if !(beta.abs() < 1.0) {
        return Err(FhsError::NonStationaryFit { beta });
    }
    Ok(ArModel {
        beta,
        fitted_on: id.to_string(),
    })
}

/// `ε(t) = x(t) − β·x(t−1)`, dated from the second observation. `None`
/// returns the series itself.
pub fn ar_residuals(x: &TimeSeries, model: Option<&ArModel>) -> TimeSeries {
    match model {
        None => x.clone(),
        Some(m) => TimeSeries::new(
            x.dates[1..].to_vec(),
            x.values.windows(2).map(|w| w[1] - m.beta * w[0]).collect(),
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EwmaParams {
    pub theta: f64,
    pub window: usize,
}

impl Default for EwmaParams {
    fn default() -> Self {
        Self {
            theta: 0.9,
            window: 60,
        }
    }
}

impl EwmaParams {
    pub fn validate(&self) -> Result<(), FhsError> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(FhsError::InvalidParameter(format!("theta = {} not in (0, 1)", self.theta)));
        }
        if self.window < 2 {
            return Err(FhsError::InvalidParameter(format!("W = {} < 2", self.window)));
        }
        Ok(())
    }
}

/// Runs `σ²(t) = θ·σ²(t−1) + (1−θ)·X²(t−1)` from `seed` over `x`, returning
/// one variance per element of `x` plus the one after it. Values are
/// floored at `floor`.
pub fn ewma_recursion(x: &[f64], theta: f64, seed: f64, floor: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + 1);
    let mut s2 = seed.max(floor);
    out.push(s2);
    for v in x {
        s2 = (theta * s2 + (1.0 - theta) * v * v).max(floor);
        out.push(s2);
    }
    out
}

/// EWMA volatility. The first `W` observations seed `σ²` with their mean
/// square; the output starts at the observation after them, and `σ(t)`
/// only uses data strictly before `t`.
pub fn ewma_vol(x: &TimeSeries, p: &EwmaParams) -> Result<TimeSeries, FhsError> {
    p.validate()?;
    let w = p.window;
    if x.len() <= w {
        return Err(FhsError::SeriesTooShort {
            needed: w + 1,
            found: x.len(),
        });
    }
    let seed = x.values[..w].iter().map(|v| v * v).sum::<f64>() / w as f64;
    let floor = if seed > 0.0 { 1e-12 * seed } else { f64::MIN_POSITIVE };
    let mut s2 = ewma_recursion(&x.values[w..], p.theta, seed, floor);
    s2.pop();
    Ok(TimeSeries::new(
        x.dates[w..].to_vec(),
        s2.into_iter().map(f64::sqrt).collect(),
    ))
}

/// `ε(t)/σ(t)` on the dates of `vol`.
pub fn devolatize(residuals: &TimeSeries, vol: &TimeSeries) -> Result<TimeSeries, FhsError> {
    let start = residuals.len().checked_sub(vol.len()).ok_or(FhsError::DateMisalignment)?;
    if residuals.dates[start..] != vol.dates[..] {
        return Err(FhsError::DateMisalignment);
    }
    Ok(TimeSeries::new(
        vol.dates.clone(),
        residuals.values[start..].iter().zip(&vol.values).map(|(e, s)| e / s).collect(),
    ))
}
