use serde::{Deserialize, Serialize};

use super::FhsError;
use crate::bachelier::PricingError;
use crate::interp::linear_clamped;
use crate::kldecomp::{reconstruct, KLModel};

/// How an extreme log-move `û` is applied to the last smile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reconstruction {
    /// `Î = I·exp(û)`, the inverse of the log-return.
    #[default]
    Multiplicative,
    /// `Î = I + exp(û)`; kept only to compare against the literal formula.
    #[serde(rename = "additive-paper")]
    Additive,
}

impl std::str::FromStr for Reconstruction {
    type Err = FhsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "multiplicative" => Ok(Self::Multiplicative),
            "additive-paper" => Ok(Self::Additive),
            other => Err(FhsError::InvalidParameter(format!("unknown reconstruction '{other}'"))),
        }
    }
}

/// `û(x) = Σ √λ_i·ξ̂_i·e_i(x) + ū(x)` over the first `xi_hat.len()` modes.
pub fn extreme_log_move(model: &KLModel, xi_hat: &[f64]) -> Result<Vec<f64>, FhsError> {
    let mut u = reconstruct(model, xi_hat, xi_hat.len())?;
    for (v, m) in u.iter_mut().zip(&model.mean_function) {
        *v += m;
    }
    Ok(u)
}

/// Extreme smile from the per-mode quantile forecasts `xi_hat` and the last
/// observed smile on the model grid.
pub fn extreme_field(
    model: &KLModel,
    xi_hat: &[f64],
    last: &[f64],
    how: Reconstruction,
) -> Result<Vec<f64>, FhsError> {
    if last.is_empty() || last.len() != model.grid.len() {
        return Err(FhsError::MissingLastSmile {
            expected: model.grid.len(),
            found: last.len(),
        });
    }
    let u = extreme_log_move(model, xi_hat)?;
    Ok(last
        .iter()
        .zip(&u)
        .map(|(i, u)| match how {
            Reconstruction::Multiplicative => i * u.exp(),
            Reconstruction::Additive => i + u.exp(),
        })
        .collect())
}

/// Vega P&L of one swaption from `last` to `extreme`:
/// `C(f, κ, Î(κ−f)) − C(f, κ, I(κ−f))` with the forward held fixed.
/// `price(f, κ, σ)` is the pricing function; smiles are interpolated
/// linearly in moneyness and clamped at the grid edges.
pub fn var_pnl<P>(
    price: P,
    forward: f64,
    strike: f64,
    moneyness: &[f64],
    extreme: &[f64],
    last: &[f64],
) -> Result<f64, FhsError>
where
    P: Fn(f64, f64, f64) -> Result<f64, PricingError>,
{
    if moneyness.is_empty() || extreme.len() != moneyness.len() || last.len() != moneyness.len() {
        return Err(FhsError::MissingLastSmile {
            expected: moneyness.len(),
            found: last.len().min(extreme.len()),
        });
    }
    let x = strike - forward;
    let shocked = price(forward, strike, linear_clamped(moneyness, extreme, x))?;
    let base = price(forward, strike, linear_clamped(moneyness, last, x))?;
    Ok(shocked - base)
}
