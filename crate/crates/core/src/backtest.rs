//! VaR backtests: hit sequences, Kupiec's proportion-of-failures test and
//! Christoffersen's independence test, both asymptotically χ²(1).

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fhs::QuantileSeries;
use crate::series::TimeSeries;
use crate::special::erfc;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BacktestError {
    #[error("realized and forecast dates are not aligned")]
    DateMisalignment,
    #[error("forecast has no quantile for alpha {0}")]
    UnknownAlpha(f64),
    #[error("alpha {0} must lie strictly between 0 and 1")]
    InvalidAlpha(f64),
    #[error("hit sequence needs at least {needed} observations, got {found}")]
    EmptySequence { needed: usize, found: usize },
    #[error("test statistic {0} is negative")]
    NegativeStatistic(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    /// `α < 0.5`: a hit is a realization at or below the quantile.
    Lower,
    /// `α > 0.5`: a hit is a realization at or above the quantile.
    Upper,
}

impl Tail {
    pub fn of(alpha: f64) -> Self {
        if alpha < 0.5 {
            Tail::Lower
        } else {
            Tail::Upper
        }
    }

    /// Expected hit probability for quantile level `alpha`.
    pub fn effective_level(self, alpha: f64) -> f64 {
        match self {
            Tail::Lower => alpha,
            Tail::Upper => 1.0 - alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitSequence {
    pub dates: Vec<NaiveDate>,
    pub hits: Vec<u8>,
    pub tail: Tail,
    pub alpha: f64,
}

impl HitSequence {
    pub fn from_hits(hits: Vec<u8>, alpha: f64) -> Self {
        let dates = TimeSeries::from_values(vec![0.0; hits.len()]).dates;
        Self {
            dates,
            hits,
            tail: Tail::of(alpha),
            alpha,
        }
    }

    pub fn count(&self) -> usize {
        self.hits.iter().filter(|h| **h == 1).count()
    }

    pub fn frequency(&self) -> f64 {
        self.count() as f64 / self.hits.len() as f64
    }
}

/// Compares realized values with the forecast quantile at level `alpha`.
/// Equality counts as a hit in either tail.
pub fn hit_sequence(
    realized: &TimeSeries,
    forecast: &QuantileSeries,
    alpha: f64,
) -> Result<HitSequence, BacktestError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(BacktestError::InvalidAlpha(alpha));
    }
    let q = forecast.level(alpha).ok_or(BacktestError::UnknownAlpha(alpha))?;
    if realized.dates != forecast.dates {
        return Err(BacktestError::DateMisalignment);
    }
    let tail = Tail::of(alpha);
    let hits = realized
        .values
        .iter()
        .zip(q)
        .map(|(&x, &v)| match tail {
            Tail::Lower => u8::from(x <= v),
            Tail::Upper => u8::from(x >= v),
        })
        .collect();
    Ok(HitSequence {
        dates: realized.dates.clone(),
        hits,
        tail,
        alpha,
    })
}

/// Counts of consecutive hit pairs: `t01` is a 0 followed by a 1, etc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransitionCounts {
    pub t00: u64,
    pub t01: u64,
    pub t10: u64,
    pub t11: u64,
    /// Zeros in the whole sequence.
    pub t0: u64,
    /// Ones in the whole sequence.
    pub t1: u64,
}

impl TransitionCounts {
    pub fn from_hits(hits: &[u8]) -> Self {
        let mut c = TransitionCounts::default();
        for w in hits.windows(2) {
            match (w[0], w[1]) {
                (0, 0) => c.t00 += 1,
                (0, _) => c.t01 += 1,
                (_, 0) => c.t10 += 1,
                _ => c.t11 += 1,
            }
        }
        c.t1 = hits.iter().filter(|h| **h != 0).count() as u64;
        c.t0 = hits.len() as u64 - c.t1;
        c
    }

    /// Table built from pair counts alone; marginals follow the pairs'
    /// "from" states plus the last observation's state.
    pub fn from_pairs(t00: u64, t01: u64, t10: u64, t11: u64) -> Self {
        Self {
            t00,
            t01,
            t10,
            t11,
            t0: t00 + t01,
            t1: t10 + t11,
        }
    }

    pub fn pairs(&self) -> u64 {
        self.t00 + self.t01 + self.t10 + self.t11
    }
}

/// A likelihood-ratio statistic with its χ²(1) p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub stat: f64,
    pub pvalue: f64,
}

/// `n·ln p` with `0·ln 0 = 0`.
fn xlogy(n: f64, p: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        n * p.ln()
    }
}

/// χ²(1) survival function, `erfc(√(x/2))`.
pub fn chi2_sf1(x: f64) -> Result<f64, BacktestError> {
    if !(x >= 0.0) {
        return Err(BacktestError::NegativeStatistic(x));
    }
    Ok(erfc((0.5 * x).sqrt()))
}

/// Kupiec POF statistic for `t0` non-hits and `t1` hits at hit probability `a`.
pub fn pof_statistic(t0: u64, t1: u64, a: f64) -> Result<TestResult, BacktestError> {
    let n = t0 + t1;
    if n == 0 {
        return Err(BacktestError::EmptySequence { needed: 1, found: 0 });
    }
    let (t0f, t1f) = (t0 as f64, t1 as f64);
    let a_hat = t1f / n as f64;
    let null = xlogy(t0f, 1.0 - a) + xlogy(t1f, a);
    let alt = xlogy(t0f, 1.0 - a_hat) + xlogy(t1f, a_hat);
    let stat = (-2.0 * (null - alt)).max(0.0);
    Ok(TestResult {
        stat,
        pvalue: chi2_sf1(stat)?,
    })
}

/// Kupiec's unconditional-coverage test.
pub fn kupiec_pof(h: &HitSequence) -> Result<TestResult, BacktestError> {
    if h.hits.len() < 2 {
        return Err(BacktestError::EmptySequence {
            needed: 2,
            found: h.hits.len(),
        });
    }
    let c = TransitionCounts::from_hits(&h.hits);
    pof_statistic(c.t0, c.t1, h.tail.effective_level(h.alpha))
}

/// Christoffersen independence statistic from a transition table. Rows of
/// the table with no observations drop out of the likelihood.
pub fn ind_statistic(c: &TransitionCounts) -> Result<TestResult, BacktestError> {
    let total = c.pairs();
    if total == 0 {
        return Err(BacktestError::EmptySequence { needed: 2, found: 0 });
    }
    let [t00, t01, t10, t11] = [c.t00, c.t01, c.t10, c.t11].map(|x| x as f64);
    let a_bar = (t01 + t11) / total as f64;
    let null = xlogy(t00 + t10, 1.0 - a_bar) + xlogy(t01 + t11, a_bar);
    let mut alt = 0.0;
    if t00 + t01 > 0.0 {
        let a01 = t01 / (t00 + t01);
        alt += xlogy(t00, 1.0 - a01) + xlogy(t01, a01);
    }
    if t10 + t11 > 0.0 {
        let a11 = t11 / (t10 + t11);
        alt += xlogy(t10, 1.0 - a11) + xlogy(t11, a11);
    }
    let stat = (-2.0 * (null - alt)).max(0.0);
    Ok(TestResult {
        stat,
        pvalue: chi2_sf1(stat)?,
    })
}

/// Christoffersen's independence test.
pub fn christoffersen_ind(h: &HitSequence) -> Result<(TestResult, TransitionCounts), BacktestError> {
    if h.hits.len() < 3 {
        return Err(BacktestError::EmptySequence {
            needed: 3,
            found: h.hits.len(),
        });
    }
    let counts = TransitionCounts::from_hits(&h.hits);
    Ok((ind_statistic(&counts)?, counts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub tail: Tail,
    pub alpha: f64,
    pub counts: TransitionCounts,
    pub alpha_hat: f64,
    pub pof: TestResult,
    pub ind: TestResult,
}

impl BacktestReport {
    pub fn passes(&self, level: f64) -> bool {
        self.pof.pvalue > level && self.ind.pvalue > level
    }
}

/// Both tests on one hit sequence.
pub fn backtest(h: &HitSequence) -> Result<BacktestReport, BacktestError> {
    let pof = kupiec_pof(h)?;
    let (ind, counts) = christoffersen_ind(h)?;
    Ok(BacktestReport {
        tail: h.tail,
        alpha: h.alpha,
        counts,
        alpha_hat: counts.t1 as f64 / h.hits.len() as f64,
        pof,
        ind,
    })
}
