/// Piecewise-linear interpolation on sorted `xs`, clamped flat outside the range.
///
/// Panics if `xs` and `ys` differ in length or are empty.
pub fn linear_clamped(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    assert_eq!(xs.len(), ys.len(), "abscissae and ordinates differ in length");
    assert!(!xs.is_empty(), "empty interpolation table");
    let last = xs.len() - 1;
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[last] {
        return ys[last];
    }
    // first index with xs[i] > x; 1 <= i <= last here
    let i = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let w = (x - x0) / (x1 - x0);
    ys[i - 1] + w * (ys[i] - ys[i - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_clamps() {
        let xs = [0.0, 1.0, 3.0];
        let ys = [1.0, 2.0, 0.0];
        assert_eq!(linear_clamped(&xs, &ys, -1.0), 1.0);
        assert_eq!(linear_clamped(&xs, &ys, 0.5), 1.5);
        assert_eq!(linear_clamped(&xs, &ys, 1.0), 2.0);
        assert_eq!(linear_clamped(&xs, &ys, 2.0), 1.0);
        assert_eq!(linear_clamped(&xs, &ys, 9.0), 0.0);
    }

    #[test]
    fn nodes_are_exact() {
        let xs = [-0.02, -0.01, 0.0, 0.015];
        let ys = [0.7, 0.65, 0.6, 0.66];
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(linear_clamped(&xs, &ys, *x), *y);
        }
    }
}
