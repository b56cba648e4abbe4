use crate::volgrid::FieldGrid;

/// Composite trapezoid weights on a sorted, possibly non-uniform grid.
pub fn trapezoid_weights(points: &[f64]) -> Vec<f64> {
    let n = points.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = 0.5 * (points[i + 1] - points[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Trapezoid weights for every flattened point of a grid; tensor products on a lattice.
pub fn grid_weights(grid: &FieldGrid) -> Vec<f64> {
    match grid {
        FieldGrid::Line { points, .. } => trapezoid_weights(points),
        FieldGrid::Lattice { first, second, .. } => {
            let w1 = trapezoid_weights(first);
            let w2 = trapezoid_weights(second);
            w1.iter()
                .flat_map(|a| w2.iter().map(move |b| a * b))
                .collect()
        }
    }
}

/// `Σ w_j f_j g_j`
pub fn inner(weights: &[f64], f: &[f64], g: &[f64]) -> f64 {
    weights
        .iter()
        .zip(f)
        .zip(g)
        .map(|((w, a), b)| w * a * b)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volgrid::Axis;

    #[test]
    fn weights_sum_to_length() {
        let w = trapezoid_weights(&[0.0, 0.5, 2.0, 3.0]);
        assert_eq!(w, vec![0.25, 1.0, 1.25, 0.5]);
        let grid = FieldGrid::lattice([Axis::Expiry, Axis::Tenor], vec![1.0, 2.0, 5.0], vec![0.0, 10.0]);
        let w = grid_weights(&grid);
        assert_eq!(w.len(), 6);
        assert!((w.iter().sum::<f64>() - 40.0).abs() < 1e-12);
    }

    #[test]
    fn exact_for_linear_functions() {
        let pts = [-1.0, -0.3, 0.1, 0.7, 1.0];
        let w = trapezoid_weights(&pts);
        let f: Vec<f64> = pts.iter().map(|x| 3.0 * x + 1.0).collect();
        let one = vec![1.0; pts.len()];
        assert!((inner(&w, &f, &one) - 2.0).abs() < 1e-14);
    }
}
