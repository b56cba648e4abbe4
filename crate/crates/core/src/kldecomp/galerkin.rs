use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::legendre::{legendre_unchecked, to_reference};
use super::quadrature::grid_weights;
use super::{gevp, EmpiricalKernel, KlError};
use crate::par::{self, Execution};
use crate::volgrid::FieldGrid;

/// Largest acceptable 2-norm condition number of the Gram matrix `B`.
pub const MAX_B_CONDITION: f64 = 1e12;

/// Default number of basis functions per axis.
pub const DEFAULT_DEGREE: usize = 8;

/// Legendre basis, mapped affinely from `[−1, 1]` onto each grid axis.
/// On a lattice the basis is the tensor product `P_m(x₁)·P_n(x₂)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    /// Number of basis functions per axis (`P_0 … P_{N−1}`).
    pub degrees: Vec<usize>,
}

impl BasisSpec {
    /// `min(8, points)` functions on every axis of `grid`.
    pub fn default_for(grid: &FieldGrid) -> Self {
        Self::uniform(grid, DEFAULT_DEGREE)
    }

    /// `min(n, points)` functions on every axis of `grid`.
    pub fn uniform(grid: &FieldGrid, n: usize) -> Self {
        Self {
            degrees: grid.axis_points().iter().map(|p| n.min(p.len())).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.degrees.iter().product()
    }

    pub fn validate(&self, grid: &FieldGrid) -> Result<(), KlError> {
        let axes = grid.axis_points();
        if axes.len() != self.degrees.len() {
            return Err(KlError::BasisMismatch(format!(
                "{} degrees for a {}-D grid",
                self.degrees.len(),
                axes.len()
            )));
        }
        for (n, pts) in self.degrees.iter().zip(&axes) {
            if pts.len() < 2 {
                return Err(KlError::GridTooSmall { points: pts.len() });
            }
            if *n < 1 || *n > pts.len() {
                return Err(KlError::BasisMismatch(format!(
                    "degree {n} outside 1..={} for this axis",
                    pts.len()
                )));
            }
        }
        Ok(())
    }

    /// `Φ[j, n] = φ_n(x_j)` for every flattened grid point.
    pub fn evaluate(&self, grid: &FieldGrid) -> Result<Array2<f64>, KlError> {
        self.validate(grid)?;
        let axes = grid.axis_points();
        let per_axis: Vec<Array2<f64>> = axes
            .iter()
            .zip(&self.degrees)
            .map(|(pts, &n)| {
                let (a, b) = (pts[0], pts[pts.len() - 1]);
                Array2::from_shape_fn((pts.len(), n), |(j, k)| {
                    legendre_unchecked(k, to_reference(pts[j], a, b))
                })
            })
            .collect();
        Ok(match per_axis.as_slice() {
            [one] => one.clone(),
            [p1, p2] => {
                // point j = (j / n_pts2, j % n_pts2), basis k = (k / n_fun2, k % n_fun2)
                let (n_pts2, n_fun2) = p2.dim();
                Array2::from_shape_fn((grid.len(), self.size()), |(j, k)| {
                    p1[[j / n_pts2, k / n_fun2]] * p2[[j % n_pts2, k % n_fun2]]
                })
            }
            _ => unreachable!("grids are 1-D or 2-D"),
        })
    }
}

/// Galerkin matrices with every integral replaced by the trapezoid rule on
/// the sample grid:
///
/// `A_mn = Σ_j Σ_k w_j w_k k̂(x_j,x_k) φ_m(x_j) φ_n(x_k)`,
/// `B_mn = Σ_j w_j φ_m(x_j) φ_n(x_j)`.
pub fn assemble_galerkin(
    kernel: &EmpiricalKernel,
    basis: &BasisSpec,
) -> Result<(Array2<f64>, Array2<f64>), KlError> {
    assemble_galerkin_with(kernel, basis, Execution::default())
}

pub fn assemble_galerkin_with(
    kernel: &EmpiricalKernel,
    basis: &BasisSpec,
    exec: Execution,
) -> Result<(Array2<f64>, Array2<f64>), KlError> {
    let phi = basis.evaluate(&kernel.grid)?;
    let w = grid_weights(&kernel.grid);
    let (p, n) = phi.dim();

    // G = W·Φ
    let g = Array2::from_shape_fn((p, n), |(j, m)| w[j] * phi[[j, m]]);
    // M = K̂·G, one grid row per task
    let m_rows = par::map_range(exec, p, |j| {
        let krow = kernel.values.row(j);
        (0..n)
            .map(|c| krow.iter().zip(g.column(c)).map(|(a, b)| a * b).sum::<f64>())
            .collect::<Vec<f64>>()
    });

    let mut a = Array2::<f64>::zeros((n, n));
    let mut b = Array2::<f64>::zeros((n, n));
    for r in 0..n {
        for c in r..n {
            let mut sa = 0.0;
            let mut sb = 0.0;
            for j in 0..p {
                sa += g[[j, r]] * m_rows[j][c];
                sb += g[[j, r]] * phi[[j, c]];
            }
            a[[r, c]] = sa;
            a[[c, r]] = sa;
            b[[r, c]] = sb;
            b[[c, r]] = sb;
        }
    }

    let condition = condition_number(&b)?;
    if !(condition <= MAX_B_CONDITION) {
        return Err(KlError::SingularB { condition });
    }
    Ok((a, b))
}

/// 2-norm condition number of a symmetric matrix; infinite if singular.
fn condition_number(b: &Array2<f64>) -> Result<f64, KlError> {
    let (values, _) = gevp::jacobi_eigen(b)?;
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(if min <= 0.0 { f64::INFINITY } else { max / min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volgrid::Axis;

    fn uniform_line(n: usize, a: f64, b: f64) -> FieldGrid {
        let pts = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect();
        FieldGrid::line(Axis::Moneyness, pts)
    }

    fn zero_kernel(grid: FieldGrid) -> EmpiricalKernel {
        let p = grid.len();
        EmpiricalKernel {
            grid,
            values: Array2::zeros((p, p)),
            sample_count: 2,
        }
    }

    #[test]
    fn gram_matrix_on_reference_interval() {
        let kernel = zero_kernel(uniform_line(101, -1.0, 1.0));
        let basis = BasisSpec { degrees: vec![4] };
        let (a, b) = assemble_galerkin(&kernel, &basis).unwrap();
        assert!((b[[0, 0]] - 2.0).abs() < 1e-14);
        assert!(b[[0, 1]].abs() < 1e-14);
        // ∫z² = 2/3; trapezoid error h²/12·(f'(1) − f'(−1)) ≈ 1.3e-4
        assert!((b[[1, 1]] - 2.0 / 3.0).abs() < 2e-4);
        assert!(a.iter().all(|x| *x == 0.0));
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(b[[r, c]].to_bits(), b[[c, r]].to_bits());
            }
        }
    }

    #[test]
    fn default_degree_is_capped_by_grid() {
        let g = uniform_line(5, 0.0, 1.0);
        assert_eq!(BasisSpec::default_for(&g).degrees, vec![5]);
        let g = uniform_line(30, 0.0, 1.0);
        assert_eq!(BasisSpec::default_for(&g).degrees, vec![8]);
        let lat = FieldGrid::lattice([Axis::Expiry, Axis::Tenor], vec![1.0, 2.0, 5.0], (1..=12).map(f64::from).collect());
        let basis = BasisSpec::default_for(&lat);
        assert_eq!(basis.degrees, vec![3, 8]);
        assert_eq!(basis.size(), 24);
        assert_eq!(basis.evaluate(&lat).unwrap().dim(), (36, 24));
    }

    #[test]
    fn tensor_basis_values() {
        let lat = FieldGrid::lattice([Axis::Expiry, Axis::Tenor], vec![0.0, 1.0, 2.0], vec![0.0, 4.0]);
        let phi = BasisSpec { degrees: vec![2, 2] }.evaluate(&lat).unwrap();
        // point 5 = (2.0, 4.0) → z = (1, 1); basis 3 = P1·P1
        assert_eq!(phi[[5, 3]], 1.0);
        // point 0 = (0, 0) → z = (−1, −1); basis 1 = P0(z1)·P1(z2) = −1
        assert_eq!(phi[[0, 1]], -1.0);
        assert_eq!(phi[[0, 2]], -1.0);
    }

    #[test]
    fn basis_validation() {
        let g = uniform_line(4, 0.0, 1.0);
        assert!(BasisSpec { degrees: vec![5] }.validate(&g).is_err());
        assert!(BasisSpec { degrees: vec![0] }.validate(&g).is_err());
        assert!(BasisSpec { degrees: vec![2, 2] }.validate(&g).is_err());
        let tiny = FieldGrid::line(Axis::Tenor, vec![1.0]);
        assert!(matches!(
            BasisSpec { degrees: vec![1] }.validate(&tiny),
            Err(KlError::GridTooSmall { points: 1 })
        ));
    }

    #[test]
    fn clustered_grid_makes_b_singular() {
        // eight nodes bunched at the ends cannot support degree-7 polynomials well
        let mut pts: Vec<f64> = (0..4).map(|i| i as f64 * 1e-7).collect();
        pts.extend((0..4).map(|i| 1.0 - (3 - i) as f64 * 1e-7));
        let kernel = zero_kernel(FieldGrid::line(Axis::Moneyness, pts));
        let err = assemble_galerkin(&kernel, &BasisSpec { degrees: vec![8] }).unwrap_err();
        assert!(matches!(err, KlError::SingularB { .. }));
    }
}
