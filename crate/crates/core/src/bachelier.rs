//! Normal-model (Bachelier) swaption pricing and static-arbitrage checks.
//!
//! Prices are per unit annuity: the annuity is a positive factor common to
//! every strike and cannot change the sign of any first or second strike
//! difference, so it is left out.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::linear_clamped;
use crate::par::{self, Execution};
use crate::special::{norm_cdf, norm_pdf};

/// Default tolerance of [`check_no_arbitrage`], in price units.
pub const DEFAULT_ARB_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("volatility {0} is negative or not finite")]
    NegativeVol(f64),
    #[error("expiry {0} is not positive")]
    NonPositiveExpiry(f64),
    #[error("need at least 3 strikes, got {0}")]
    TooFewStrikes(usize),
    #[error("strikes must be strictly increasing and match prices in length")]
    InvalidCurve,
    #[error("smile grid and vols must be non-empty and of equal length")]
    InvalidSmile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwaptionSpec {
    /// Option expiry in years.
    pub expiry: f64,
    /// Underlying swap tenor in years; informational only.
    pub tenor: f64,
    /// Payer = call on the swap rate, receiver = put.
    pub payer: bool,
}

impl SwaptionSpec {
    pub fn payer(expiry: f64, tenor: f64) -> Self {
        Self {
            expiry,
            tenor,
            payer: true,
        }
    }

    pub fn price(&self, forward: f64, strike: f64, vol: f64) -> Result<f64, PricingError> {
        let call = price(forward, strike, vol, self.expiry)?;
        Ok(if self.payer {
            call
        } else {
            call - (forward - strike)
        })
    }
}

fn check_inputs(vol: f64, expiry: f64) -> Result<(), PricingError> {
    if !(vol >= 0.0 && vol.is_finite()) {
        return Err(PricingError::NegativeVol(vol));
    }
    if !(expiry > 0.0) {
        return Err(PricingError::NonPositiveExpiry(expiry));
    }
    Ok(())
}

/// Payer swaption (call on the forward swap rate) under the normal model:
/// `(f−κ)·Φ(d) + σ√T·φ(d)` with `d = (f−κ)/(σ√T)`.
///
/// Rates may be negative. With zero vol the intrinsic value is returned.
pub fn price(forward: f64, strike: f64, vol: f64, expiry: f64) -> Result<f64, PricingError> {
    check_inputs(vol, expiry)?;
    let moneyness = forward - strike;
    let std_dev = vol * expiry.sqrt();
    if std_dev == 0.0 {
        return Ok(moneyness.max(0.0));
    }
    let d = moneyness / std_dev;
    Ok(moneyness * norm_cdf(d) + std_dev * norm_pdf(d))
}

/// `∂C/∂σ = √T·φ(d)`.
pub fn vega(forward: f64, strike: f64, vol: f64, expiry: f64) -> Result<f64, PricingError> {
    check_inputs(vol, expiry)?;
    let std_dev = vol * expiry.sqrt();
    if std_dev == 0.0 {
        return Ok(if forward == strike { expiry.sqrt() * norm_pdf(0.0) } else { 0.0 });
    }
    Ok(expiry.sqrt() * norm_pdf((forward - strike) / std_dev))
}

/// Payer prices across strikes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceCurve {
    pub strikes: Vec<f64>,
    pub prices: Vec<f64>,
}

impl PriceCurve {
    pub fn new(strikes: Vec<f64>, prices: Vec<f64>) -> Result<Self, PricingError> {
        if strikes.len() != prices.len() || strikes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(PricingError::InvalidCurve);
        }
        Ok(Self { strikes, prices })
    }
}

/// Prices every strike with the smile vol at its moneyness `κ − f`.
/// The smile is interpolated linearly in moneyness and held flat beyond
/// its grid.
pub fn price_curve(
    forward: f64,
    strikes: &[f64],
    smile_moneyness: &[f64],
    smile_vols: &[f64],
    expiry: f64,
) -> Result<PriceCurve, PricingError> {
    if smile_moneyness.is_empty() || smile_moneyness.len() != smile_vols.len() {
        return Err(PricingError::InvalidSmile);
    }
    let prices = strikes
        .iter()
        .map(|&k| {
            let vol = linear_clamped(smile_moneyness, smile_vols, k - forward);
            price(forward, k, vol, expiry)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    PriceCurve::new(strikes.to_vec(), prices)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationKind {
    /// Price increases from strike `index` to `index + 1`.
    Monotonicity,
    /// Price at interior strike `index` lies above the chord of its neighbours.
    Convexity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArbitrageReport {
    pub monotone_ok: bool,
    pub convex_ok: bool,
    pub violations: Vec<Violation>,
}

impl ArbitrageReport {
    pub fn is_free(&self) -> bool {
        self.monotone_ok && self.convex_ok
    }
}

/// Checks that call prices are non-increasing and convex in strike.
///
/// Both conditions are tested in price units: `C(κ_{i+1}) − C(κ_i) ≤ tol`,
/// and the butterfly `chord_i − C(κ_i) ≥ −tol` where `chord_i` is the linear
/// interpolation of the neighbouring prices at `κ_i`. On a uniform strike
/// grid the latter is half the second difference.
pub fn check_no_arbitrage(curve: &PriceCurve, tol: f64) -> Result<ArbitrageReport, PricingError> {
    let n = curve.strikes.len();
    if n < 3 {
        return Err(PricingError::TooFewStrikes(n));
    }
    let (k, p) = (&curve.strikes, &curve.prices);
    let mut violations = Vec::new();
    for i in 0..n - 1 {
        if p[i + 1] - p[i] > tol {
            violations.push(Violation {
                index: i,
                kind: ViolationKind::Monotonicity,
            });
        }
    }
    for i in 1..n - 1 {
        let w = (k[i] - k[i - 1]) / (k[i + 1] - k[i - 1]);
        let chord = (1.0 - w) * p[i - 1] + w * p[i + 1];
        if chord - p[i] < -tol {
            violations.push(Violation {
                index: i,
                kind: ViolationKind::Convexity,
            });
        }
    }
    Ok(ArbitrageReport {
        monotone_ok: !violations.iter().any(|v| v.kind == ViolationKind::Monotonicity),
        convex_ok: !violations.iter().any(|v| v.kind == ViolationKind::Convexity),
        violations,
    })
}

/// One smile to check: forward, strikes and the smile on its moneyness grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SmileCase<'a> {
    pub forward: f64,
    pub strikes: &'a [f64],
    pub smile_moneyness: &'a [f64],
    pub smile_vols: &'a [f64],
}

/// Builds and checks a price curve per case, concurrently when requested.
pub fn check_smiles(
    cases: &[SmileCase<'_>],
    expiry: f64,
    tol: f64,
    exec: Execution,
) -> Result<Vec<ArbitrageReport>, PricingError> {
    par::try_map_range(exec, cases.len(), |i| {
        let c = &cases[i];
        let curve = price_curve(c.forward, c.strikes, c.smile_moneyness, c.smile_vols, expiry)?;
        check_no_arbitrage(&curve, tol)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_vol_is_intrinsic() {
        assert_eq!(price(0.02, 0.01, 0.0, 1.0).unwrap(), 0.01);
        assert_eq!(price(0.01, 0.02, 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn at_the_money() {
        let p = price(0.03, 0.03, 0.01, 1.0).unwrap();
        assert!((p - 0.01 / (2.0 * PI).sqrt()).abs() < 1e-15);
        assert!((p - 0.003_989_42).abs() < 1e-7);
    }

    #[test]
    fn one_standard_deviation_in_the_money() {
        let p = price(0.02, 0.01, 0.01, 1.0).unwrap();
        assert!((p - 0.010_833_2).abs() < 2e-6);
    }

    #[test]
    fn negative_rates_are_fine() {
        let p = price(-0.005, -0.002, 0.006, 2.0).unwrap();
        let q = price(0.0, 0.003, 0.006, 2.0).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn input_errors() {
        assert_eq!(price(0.0, 0.0, -0.01, 1.0), Err(PricingError::NegativeVol(-0.01)));
        assert_eq!(price(0.0, 0.0, 0.01, 0.0), Err(PricingError::NonPositiveExpiry(0.0)));
        assert!(price(0.0, 0.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn receiver_by_parity() {
        let spec = SwaptionSpec {
            expiry: 5.0,
            tenor: 10.0,
            payer: false,
        };
        let put = spec.price(0.02, 0.025, 0.007, ).unwrap();
        let call = SwaptionSpec::payer(5.0, 10.0).price(0.02, 0.025, 0.007).unwrap();
        assert!((call - put - (0.02 - 0.025)).abs() < 1e-16);
        assert!(put > 0.005);
    }

    #[test]
    fn arbitrage_check_examples() {
        let linear = PriceCurve::new(vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]).unwrap();
        let r = check_no_arbitrage(&linear, DEFAULT_ARB_TOL).unwrap();
        assert!(r.monotone_ok && r.convex_ok && r.violations.is_empty());

        let bumped = PriceCurve::new(vec![1.0, 2.0, 3.0], vec![3.0, 1.0, 2.0]).unwrap();
        let r = check_no_arbitrage(&bumped, DEFAULT_ARB_TOL).unwrap();
        assert!(!r.monotone_ok);
        assert!(r.convex_ok);
        assert_eq!(
            r.violations,
            vec![Violation {
                index: 1,
                kind: ViolationKind::Monotonicity
            }]
        );

        let concave = PriceCurve::new(vec![1.0, 2.0, 4.0], vec![3.0, 2.5, 0.0]).unwrap();
        let r = check_no_arbitrage(&concave, DEFAULT_ARB_TOL).unwrap();
        assert!(r.monotone_ok && !r.convex_ok);
        assert_eq!(r.violations[0].index, 1);

        let short = PriceCurve::new(vec![1.0, 2.0], vec![1.0, 0.5]).unwrap();
        assert_eq!(check_no_arbitrage(&short, 1e-10), Err(PricingError::TooFewStrikes(2)));
        assert!(PriceCurve::new(vec![1.0, 1.0], vec![1.0, 0.5]).is_err());
    }

    #[test]
    fn flat_smile_curve() {
        let strikes: Vec<f64> = (0..21).map(|i| 0.01 + 0.001 * i as f64).collect();
        let curve = price_curve(0.02, &strikes, &[-0.01, 0.0, 0.01], &[0.007; 3], 10.0).unwrap();
        for (k, p) in strikes.iter().zip(&curve.prices) {
            assert_eq!(*p, price(0.02, *k, 0.007, 10.0).unwrap());
        }
        assert!(check_no_arbitrage(&curve, DEFAULT_ARB_TOL).unwrap().is_free());

        let single = price_curve(0.02, &[0.021], &[0.0], &[0.006], 1.0).unwrap();
        assert_eq!(single.prices, vec![price(0.02, 0.021, 0.006, 1.0).unwrap()]);
    }

    #[test]
    fn far_otm_prices_vanish_monotonically() {
        let strikes: Vec<f64> = (0..30).map(|i| 0.02 + 0.005 * i as f64).collect();
        let curve = price_curve(0.02, &strikes, &[-0.02, 0.0, 0.02], &[0.008, 0.0065, 0.0075], 1.0).unwrap();
        assert!(curve.prices.windows(2).all(|w| w[1] <= w[0]));
        assert!(*curve.prices.last().unwrap() < 1e-30);
    }

    #[test]
    fn batch_check_matches_single() {
        let grid = [-0.01, 0.0, 0.01];
        let vols = [0.0075, 0.0065, 0.0070];
        let strikes = [0.01, 0.015, 0.02, 0.025, 0.03];
        let cases = vec![
            SmileCase {
                forward: 0.02,
                strikes: &strikes,
                smile_moneyness: &grid,
                smile_vols: &vols,
            };
            16
        ];
        let seq = check_smiles(&cases, 5.0, DEFAULT_ARB_TOL, Execution::Sequential).unwrap();
        let par = check_smiles(&cases, 5.0, DEFAULT_ARB_TOL, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        assert!(seq.iter().all(ArbitrageReport::is_free));
    }
}
