//! Symmetric-definite generalized eigenproblem `A·d = λ·B·d`.
//!
//! `B = L·Lᵀ` by Cholesky, the standard problem `C = L⁻¹·A·L⁻ᵀ` is solved by
//! cyclic Jacobi rotations, and eigenvectors are mapped back with `d = L⁻ᵀ·v`.
//! The sweep order is fixed (row-cyclic), so results are deterministic.

use ndarray::Array2;

use super::KlError;

/// Convergence target for the off-diagonal Frobenius norm, relative to ‖C‖_F.
pub const JACOBI_TOL: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 100;

/// One eigenpair of the generalized problem. `coeffs` is `B`-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub coeffs: Vec<f64>,
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(b: &Array2<f64>) -> Result<Array2<f64>, KlError> {
    let n = b.nrows();
    assert_eq!(n, b.ncols(), "square matrix expected");
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = b[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(KlError::CholeskyFailure { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[[j, j]] = djj;
        for i in j + 1..n {
            let mut s = b[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L·x = rhs` in place.
fn forward_substitute(l: &Array2<f64>, x: &mut [f64]) {
    for i in 0..x.len() {
        let mut s = x[i];
        for k in 0..i {
            s -= l[[i, k]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
}

/// Solves `Lᵀ·x = rhs` in place.
fn back_substitute_transposed(l: &Array2<f64>, x: &mut [f64]) {
    let n = x.len();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
}

fn off_diagonal_norm(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[[i, j]] * a[[i, j]];
            }
        }
    }
    s.sqrt()
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, V)` in the original diagonal order, with the
/// eigenvectors as the columns of `V`.
pub fn jacobi_eigen(c: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>), KlError> {
    let n = c.nrows();
    assert_eq!(n, c.ncols(), "square matrix expected");
    let mut a = c.clone();
    let mut v = Array2::<f64>::eye(n);
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = JACOBI_TOL * frob;

    let mut sweeps = 0;
    while off_diagonal_norm(&a) > target {
        if sweeps == MAX_SWEEPS {
            return Err(KlError::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = cs * akp - sn * akq;
                    a[[k, q]] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = cs * apk - sn * aqk;
                    a[[q, k]] = sn * apk + cs * aqk;
                }
                a[[p, q]] = 0.0;
                a[[q, p]] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = cs * vkp - sn * vkq;
                    v[[k, q]] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    Ok(((0..n).map(|i| a[[i, i]]).collect(), v))
}

/// Eigenpairs of `A·d = λ·B·d`, sorted by eigenvalue descending.
///
/// `A` must be symmetric, `B` symmetric positive definite. Each `d`
/// satisfies `dᵀ·B·d = 1`.
pub fn solve_gevp(a: &Array2<f64>, b: &Array2<f64>) -> Result<Vec<EigenPair>, KlError> {
    let n = a.nrows();
    assert_eq!(a.dim(), (n, n), "A must be square");
    assert_eq!(b.dim(), (n, n), "A and B must have the same shape");
    let l = cholesky(b)?;

    // Y = L⁻¹A column by column; then C = L⁻¹Yᵀ, using the symmetry of A.
    let mut y = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut col: Vec<f64> = a.column(j).to_vec();
        forward_substitute(&l, &mut col);
        for i in 0..n {
            y[[i, j]] = col[i];
        }
    }
    let mut c = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut col: Vec<f64> = y.row(j).to_vec();
        forward_substitute(&l, &mut col);
        for i in 0..n {
            c[[i, j]] = col[i];
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (c[[i, j]] + c[[j, i]]);
            c[[i, j]] = s;
            c[[j, i]] = s;
        }
    }

    let (values, vecs) = jacobi_eigen(&c)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    Ok(order
        .into_iter()
        .map(|k| {
            let mut d = vecs.column(k).to_vec();
            back_substitute_transposed(&l, &mut d);
            EigenPair {
                value: values[k],
                coeffs: d,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn residual(a: &Array2<f64>, b: &Array2<f64>, p: &EigenPair) -> f64 {
        let d = ndarray::Array1::from(p.coeffs.clone());
        let r = a.dot(&d) - b.dot(&d) * p.value;
        r.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    #[test]
    fn diagonal_case() {
        let a = array![[3.0, 0.0], [0.0, 1.0]];
        let pairs = solve_gevp(&a, &Array2::eye(2)).unwrap();
        assert_eq!(pairs[0].value, 3.0);
        assert_eq!(pairs[1].value, 1.0);
        assert_eq!(pairs[0].coeffs[1], 0.0);
        assert_eq!(pairs[1].coeffs[0], 0.0);
    }

    #[test]
    fn two_by_two_coupled() {
        // characteristic polynomial (2−λ)² − 1 = 0 → λ ∈ {3, 1}
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let pairs = solve_gevp(&a, &Array2::eye(2)).unwrap();
        assert!((pairs[0].value - 3.0).abs() < 1e-14);
        assert!((pairs[1].value - 1.0).abs() < 1e-14);
        let d0 = &pairs[0].coeffs;
        let d1 = &pairs[1].coeffs;
        assert!((d0[0] - d0[1]).abs() < 1e-14);
        assert!((d1[0] + d1[1]).abs() < 1e-14);
        assert!((d0[0].hypot(d0[1]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rank_one() {
        let b = [1.0, -2.0, 0.5, 3.0];
        let a = Array2::from_shape_fn((4, 4), |(i, j)| b[i] * b[j]);
        let pairs = solve_gevp(&a, &Array2::eye(4)).unwrap();
        let norm2: f64 = b.iter().map(|x| x * x).sum();
        assert!((pairs[0].value - norm2).abs() < 1e-12);
        for p in &pairs[1..] {
            assert!(p.value.abs() < 1e-12);
        }
    }

    #[test]
    fn generalized_with_nontrivial_b() {
        let a = array![[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 1.0]];
        let b = array![[2.0, 0.3, 0.0], [0.3, 1.5, 0.1], [0.0, 0.1, 1.0]];
        let pairs = solve_gevp(&a, &b).unwrap();
        for w in pairs.windows(2) {
            assert!(w[0].value >= w[1].value);
        }
        for (i, p) in pairs.iter().enumerate() {
            assert!(residual(&a, &b, p) < 1e-12);
            for (j, q) in pairs.iter().enumerate() {
                let dp = ndarray::Array1::from(p.coeffs.clone());
                let dq = ndarray::Array1::from(q.coeffs.clone());
                let g = dp.dot(&b.dot(&dq));
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let b = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(cholesky(&b), Err(KlError::CholeskyFailure { pivot: 1, .. })));
        assert!(solve_gevp(&Array2::eye(2), &b).is_err());
    }

    #[test]
    fn zero_matrix_converges_immediately() {
        let pairs = solve_gevp(&Array2::zeros((3, 3)), &Array2::eye(3)).unwrap();
        assert!(pairs.iter().all(|p| p.value == 0.0));
    }
}
