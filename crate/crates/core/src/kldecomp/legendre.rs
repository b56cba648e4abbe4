use super::KlError;

/// Legendre polynomial `P_n(z)` via `(k+1)P_{k+1} = (2k+1)z·P_k − k·P_{k−1}`.
pub fn legendre_eval(n: usize, z: f64) -> Result<f64, KlError> {
    if !(-1.0..=1.0).contains(&z) {
        return Err(KlError::OutOfDomain { z });
    }
    Ok(legendre_unchecked(n, z))
}

pub(crate) fn legendre_unchecked(n: usize, z: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, z);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0) * z * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Affine map of `[a, b]` onto `[−1, 1]`; endpoints map exactly.
pub(crate) fn to_reference(x: f64, a: f64, b: f64) -> f64 {
    (2.0 * (x - a) / (b - a) - 1.0).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_orders() {
        for z in [-1.0, -0.3, 0.0, 0.8, 1.0] {
            assert_eq!(legendre_eval(0, z).unwrap(), 1.0);
            assert_eq!(legendre_eval(1, z).unwrap(), z);
        }
        assert_eq!(legendre_eval(1, -1.0).unwrap(), -1.0);
        assert!((legendre_eval(2, 0.5).unwrap() + 0.125).abs() < 1e-15);
    }

    #[test]
    fn matches_closed_forms() {
        for i in 0..=40 {
            let z = -1.0 + 0.05 * i as f64;
            let p3 = 0.5 * (5.0 * z.powi(3) - 3.0 * z);
            let p4 = (35.0 * z.powi(4) - 30.0 * z * z + 3.0) / 8.0;
            assert!((legendre_eval(3, z).unwrap() - p3).abs() < 1e-14);
            assert!((legendre_eval(4, z).unwrap() - p4).abs() < 1e-14);
        }
        // P_n(1) = 1, P_n(−1) = (−1)^n
        for n in 0..12 {
            assert!((legendre_eval(n, 1.0).unwrap() - 1.0).abs() < 1e-13);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!((legendre_eval(n, -1.0).unwrap() - sign).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_points_outside() {
        assert!(matches!(legendre_eval(2, 1.5), Err(KlError::OutOfDomain { .. })));
        assert!(legendre_eval(0, f64::NAN).is_err());
    }
}
