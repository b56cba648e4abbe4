//! Filtered historical simulation on projection series.
//!
//! Per mode: optional AR(1) mean filter, EWMA volatility filter, rolling
//! empirical quantiles of the standardized residuals, rescaled by the
//! current volatility and mapped back through the AR recursion. The
//! per-mode forecasts are then combined into extreme smiles.

mod diagnostics;
mod filter;
mod quantile;
mod scenario;

pub use diagnostics::{acf, pacf};
pub use filter::{ar_residuals, devolatize, ewma_recursion, ewma_vol, fit_ar1, ArModel, EwmaParams, MIN_AR_LENGTH};
pub use quantile::{
    empirical_quantile, forecast_residual_quantile, forecast_xi_quantile, rolling_quantile,
    rolling_quantile_with, QuantileSeries,
};
pub use scenario::{extreme_field, extreme_log_move, var_pnl, Reconstruction};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bachelier::PricingError;
use crate::kldecomp::{KLModel, KlError, ProjectionSeries};
use crate::par::{self, Execution};
use crate::series::TimeSeries;
use crate::volgrid::FieldSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FhsError {
    #[error("series has {found} observations, need at least {needed}")]
    SeriesTooShort { needed: usize, found: usize },
    #[error("series has zero variance")]
    DegenerateSeries,
    #[error("fitted AR coefficient {beta} is not stationary")]
    NonStationaryFit { beta: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("rolling window {window} needs more than {available} observations")]
    InsufficientHistory { window: usize, available: usize },
    #[error("series dates are not aligned")]
    DateMisalignment,
    #[error("last smile has {found} points, model grid has {expected}")]
    MissingLastSmile { expected: usize, found: usize },
    #[error(transparent)]
    Kl(#[from] KlError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FhsConfig {
    /// Historical-simulation window.
    pub window: usize,
    pub ewma: EwmaParams,
    pub alphas: Vec<f64>,
    /// AR(1) filter on/off per mode; modes past the end use no filter.
    pub use_ar: Vec<bool>,
    /// Per-mode tail choice for combined scenarios: `+1` takes the same
    /// level as the scenario, `−1` the opposite one.
    pub signs: Vec<i8>,
    pub reconstruction: Reconstruction,
}

impl Default for FhsConfig {
    fn default() -> Self {
        Self {
            window: 250,
            ewma: EwmaParams::default(),
            alphas: vec![0.01, 0.99],
            use_ar: vec![true, false, false],
            signs: vec![1, 1, 1],
            reconstruction: Reconstruction::Multiplicative,
        }
    }
}

impl FhsConfig {
    pub fn validate(&self) -> Result<(), FhsError> {
        self.ewma.validate()?;
        for &a in &self.alphas {
            quantile::check_alpha(a)?;
        }
        if self.alphas.is_empty() {
            return Err(FhsError::InvalidParameter("no quantile levels".into()));
        }
        if self.window < 2 {
            return Err(FhsError::InvalidParameter(format!("L = {} < 2", self.window)));
        }
        if let Some(s) = self.signs.iter().find(|s| s.abs() != 1) {
            return Err(FhsError::InvalidParameter(format!("sign {s} is not ±1")));
        }
        Ok(())
    }

    pub fn ar_enabled(&self, mode: usize) -> bool {
        self.use_ar.get(mode).copied().unwrap_or(false)
    }

    pub fn sign(&self, mode: usize) -> i8 {
        self.signs.get(mode).copied().unwrap_or(1)
    }

    /// Levels forecast per mode: the configured ones plus their complements,
    /// ascending.
    pub fn levels(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &a in &self.alphas {
            for l in [a, 1.0 - a] {
                if !out.iter().any(|o| (o - l).abs() < 1e-12) {
                    out.push(l);
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// Observations consumed before the first forecast of a mode.
    pub fn warmup(&self, mode: usize) -> usize {
        usize::from(self.ar_enabled(mode)) + self.ewma.window + self.window
    }
}

/// Every intermediate series of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeForecast {
    pub mode: usize,
    pub ar: Option<ArModel>,
    pub residuals: TimeSeries,
    pub vol: TimeSeries,
    pub devol: TimeSeries,
    pub residual_q: QuantileSeries,
    pub xi_q: QuantileSeries,
}

impl ModeForecast {
    pub fn beta(&self) -> f64 {
        self.ar.as_ref().map_or(0.0, |m| m.beta)
    }

    /// Realized residuals on the forecast dates.
    pub fn realized_residuals(&self) -> TimeSeries {
        self.residuals.tail_from(self.residuals.len() - self.residual_q.len())
    }
}

/// Runs the filter chain on one projection series.
pub fn forecast_mode(
    xi: &TimeSeries,
    mode: usize,
    cfg: &FhsConfig,
    exec: Execution,
) -> Result<ModeForecast, FhsError> {
    cfg.validate()?;
    let ar = if cfg.ar_enabled(mode) {
        Some(fit_ar1(&xi.values, &format!("mode{}", mode + 1))?)
    } else {
        None
    };
    let residuals = ar_residuals(xi, ar.as_ref());
    let vol = ewma_vol(&residuals, &cfg.ewma)?;
    let devol = devolatize(&residuals, &vol)?;
    let residual_q = forecast_residual_quantile(&devol, &vol, cfg.window, &cfg.levels(), exec)?;
    let beta = ar.as_ref().map_or(0.0, |m| m.beta);
    let xi_q = forecast_xi_quantile(xi, beta, &residual_q)?;
    Ok(ModeForecast {
        mode,
        ar,
        residuals,
        vol,
        devol,
        residual_q,
        xi_q,
    })
}

/// All modes of a projection series; modes run concurrently.
pub fn forecast_modes(
    proj: &ProjectionSeries,
    cfg: &FhsConfig,
    exec: Execution,
) -> Result<Vec<ModeForecast>, FhsError> {
    par::try_map_range(exec, proj.n_modes(), |i| forecast_mode(&proj.mode(i), i, cfg, exec))
}

/// Per-date combined scenario: mode `i` takes level `alpha` when its sign
/// is `+1` and `1 − alpha` otherwise. Only dates forecast for every mode
/// are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub alpha: f64,
    pub dates: Vec<NaiveDate>,
    /// `xi_hat[t][i]` for date `t` and mode `i`.
    pub xi_hat: Vec<Vec<f64>>,
}

pub fn combine(forecasts: &[ModeForecast], alpha: f64, cfg: &FhsConfig) -> Result<Scenario, FhsError> {
    let n = forecasts.iter().map(|f| f.xi_q.len()).min().unwrap_or(0);
    let mut cols = Vec::with_capacity(forecasts.len());
    let mut dates: Option<Vec<NaiveDate>> = None;
    for f in forecasts {
        let q = f.xi_q.tail(n);
        let level = if cfg.sign(f.mode) < 0 { 1.0 - alpha } else { alpha };
        let col = q
            .level(level)
            .ok_or_else(|| FhsError::InvalidParameter(format!("level {level} was not forecast")))?
            .to_vec();
        match &dates {
            None => dates = Some(q.dates),
            Some(d) if *d != q.dates => return Err(FhsError::DateMisalignment),
            Some(_) => {}
        }
        cols.push(col);
    }
    Ok(Scenario {
        alpha,
        dates: dates.unwrap_or_default(),
        xi_hat: (0..n).map(|t| cols.iter().map(|c| c[t]).collect()).collect(),
    })
}

/// Extreme smile on every scenario date, each built from the observed
/// smile of the preceding date in `levels`.
pub fn extreme_path(
    model: &KLModel,
    scenario: &Scenario,
    levels: &FieldSeries,
    how: Reconstruction,
) -> Result<Vec<Vec<f64>>, FhsError> {
    scenario
        .dates
        .iter()
        .zip(&scenario.xi_hat)
        .map(|(d, xi_hat)| {
            let pos = levels.position(*d).filter(|p| *p > 0).ok_or(FhsError::DateMisalignment)?;
            extreme_field(model, xi_hat, &levels.sample(pos - 1), how)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    fn small_cfg() -> FhsConfig {
        FhsConfig {
            window: 50,
            ewma: EwmaParams {
                theta: 0.9,
                window: 20,
            },
            ..FhsConfig::default()
        }
    }

    #[test]
    fn levels_include_complements() {
        let cfg = FhsConfig {
            alphas: vec![0.05],
            ..FhsConfig::default()
        };
        assert_eq!(cfg.levels(), vec![0.05, 0.95]);
        assert_eq!(FhsConfig::default().levels(), vec![0.01, 0.99]);
    }

    #[test]
    fn config_checks() {
        let bad = FhsConfig {
            signs: vec![1, 0],
            ..FhsConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(FhsConfig::default().warmup(0), 311);
        assert_eq!(FhsConfig::default().warmup(1), 310);
    }

    #[test]
    fn mode_pipeline_lengths_and_dates() {
        let xi = TimeSeries::from_values(noise(400, 1));
        let cfg = small_cfg();
        let f = forecast_mode(&xi, 0, &cfg, Execution::Sequential).unwrap();
        assert_eq!(f.residuals.len(), 399);
        assert_eq!(f.vol.len(), 379);
        assert_eq!(f.xi_q.len(), 400 - cfg.warmup(0));
        assert_eq!(f.xi_q.dates.last(), xi.dates.last());
        assert_eq!(f.realized_residuals().dates, f.xi_q.dates);
        let lo = f.xi_q.level(0.01).unwrap();
        let hi = f.xi_q.level(0.99).unwrap();
        assert!(lo.iter().zip(hi).all(|(a, b)| a <= b));
    }

    #[test]
    fn reduces_to_historical_simulation() {
        // no AR, σ ≡ 1 via a constant-magnitude series
        let x: Vec<f64> = noise(300, 3).iter().map(|v| v.signum()).collect();
        let xi = TimeSeries::from_values(x);
        let cfg = FhsConfig {
            use_ar: vec![false],
            ..small_cfg()
        };
        let f = forecast_mode(&xi, 0, &cfg, Execution::Sequential).unwrap();
        assert!(f.vol.values.iter().all(|s| (s - 1.0).abs() < 1e-12));
        let hs = rolling_quantile(&xi.tail_from(cfg.ewma.window), cfg.window, &cfg.levels()).unwrap();
        assert_eq!(f.xi_q.dates, hs.dates);
        for (a, b) in f.xi_q.values.iter().flatten().zip(hs.values.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn combined_scenario_uses_common_dates_and_signs() {
        let proj = ProjectionSeries {
            dates: TimeSeries::from_values(vec![0.0; 300]).dates,
            xi: vec![noise(300, 4), noise(300, 5)],
        };
        let cfg = FhsConfig {
            signs: vec![1, -1],
            ..small_cfg()
        };
        let seq = forecast_modes(&proj, &cfg, Execution::Sequential).unwrap();
        let par = forecast_modes(&proj, &cfg, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        let s = combine(&seq, 0.01, &cfg).unwrap();
        assert_eq!(s.dates.len(), seq[0].xi_q.len());
        assert_eq!(s.dates.len() + 1, seq[1].xi_q.len());
        let t = s.dates.len() - 1;
        assert_eq!(s.xi_hat[t][0], *seq[0].xi_q.level(0.01).unwrap().last().unwrap());
        assert_eq!(s.xi_hat[t][1], *seq[1].xi_q.level(0.99).unwrap().last().unwrap());
    }
}
