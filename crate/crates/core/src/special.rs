//! Normal distribution helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Complementary error function.
///
/// Backed by the `libm` port of the FreeBSD msun implementation, which is
/// pure Rust and accurate to about one ulp, so results are reproducible
/// across platforms.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF, `Φ(x) = erfc(−x/√2)/2`.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}
