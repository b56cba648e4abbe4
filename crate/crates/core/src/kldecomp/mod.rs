//! Karhunen-Loève decomposition of centered return fields.
//!
//! The covariance operator of the field is estimated on the sample grid,
//! reduced by a Galerkin projection onto a Legendre basis to the
//! generalized eigenproblem `A·d = λ·B·d`, and solved with a Cholesky
//! reduction plus cyclic Jacobi. All integrals use the composite trapezoid
//! rule on the data grid, so eigenfunctions are orthonormal under the same
//! discrete inner product that [`project`] uses and the projections come out
//! uncorrelated with unit variance up to roundoff.

mod galerkin;
mod gevp;
mod kernel;
mod legendre;
pub mod quadrature;

pub use galerkin::{assemble_galerkin, assemble_galerkin_with, BasisSpec, DEFAULT_DEGREE, MAX_B_CONDITION};
pub use gevp::{cholesky, jacobi_eigen, solve_gevp, EigenPair, JACOBI_TOL, MAX_SWEEPS};
pub use kernel::{estimate_kernel, estimate_kernel_with, EmpiricalKernel};
pub use legendre::legendre_eval;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::{self, Execution};
use crate::series::TimeSeries;
use crate::volgrid::{Axis, FieldGrid, ReturnField};

/// Eigenvalues within `±CLIP_TOL·λ₁` of zero are roundoff and clipped to zero.
pub const CLIP_TOL: f64 = 1e-10;
/// Integrals smaller than this fall back to the leftmost-point sign rule.
pub const SIGN_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KlError {
    #[error("return field must be centered before kernel estimation")]
    NotCentered,
    #[error("need at least 2 samples, found {found}")]
    TooFewSamples { found: usize },
    #[error("Legendre argument {z} outside [-1, 1]")]
    OutOfDomain { z: f64 },
    #[error("grid axis has {points} points, need at least 2")]
    GridTooSmall { points: usize },
    #[error("basis does not fit the grid: {0}")]
    BasisMismatch(String),
    #[error("Gram matrix B is numerically singular (condition {condition:e}); lower the basis degree")]
    SingularB { condition: f64 },
    #[error("Cholesky failed at pivot {pivot} (value {value:e}); B is not positive definite")]
    CholeskyFailure { pivot: usize, value: f64 },
    #[error("Jacobi iteration did not converge in {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("eigenvalue {value:e} of mode {mode} is negative beyond roundoff; kernel is not PSD")]
    IndefiniteKernel { mode: usize, value: f64 },
    #[error("requested {requested} modes but only {available} are available")]
    TooManyModes { requested: usize, available: usize },
    #[error("return field grid differs from the model grid")]
    GridMismatch,
    #[error("mode {mode} has zero eigenvalue; its projection is undefined")]
    ZeroEigenvalue { mode: usize },
    #[error("expected {expected} values, got {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("spectrum is identically zero")]
    AllZeroSpectrum,
}

/// Bounded domain spanned by the grid: one `[a, b]` per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub axes: Vec<Axis>,
    pub bounds: Vec<(f64, f64)>,
}

impl Domain {
    pub fn of_grid(grid: &FieldGrid) -> Self {
        Self {
            axes: grid.axes(),
            bounds: grid
                .axis_points()
                .iter()
                .map(|p| (p[0], p[p.len() - 1]))
                .collect(),
        }
    }

    /// Length, area, ...
    pub fn measure(&self) -> f64 {
        self.bounds.iter().map(|(a, b)| b - a).product()
    }
}

/// One eigenpair of the covariance operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenMode {
    pub eigenvalue: f64,
    /// Basis coefficients `D` of the eigenfunction.
    pub coeffs: Vec<f64>,
    /// The eigenfunction sampled on the grid.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KLModel {
    pub domain: Domain,
    pub basis: BasisSpec,
    pub grid: FieldGrid,
    /// Trapezoid weights of the grid points.
    pub weights: Vec<f64>,
    /// Retained modes, eigenvalue descending.
    pub modes: Vec<EigenMode>,
    /// Every eigenvalue of the Galerkin problem (clipped), descending.
    pub spectrum: Vec<f64>,
    /// Per-point mean removed before the decomposition.
    pub mean_function: Vec<f64>,
}

impl KLModel {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.eigenvalue).collect()
    }

    /// Discrete inner product `Σ_j w_j f(x_j) g(x_j)`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        quadrature::inner(&self.weights, f, g)
    }
}

/// Unit-variance projections `ξ_i(t)`, one series per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSeries {
    pub dates: Vec<NaiveDate>,
    pub xi: Vec<Vec<f64>>,
}

impl ProjectionSeries {
    pub fn n_modes(&self) -> usize {
        self.xi.len()
    }

    pub fn mode(&self, i: usize) -> TimeSeries {
        TimeSeries::new(self.dates.clone(), self.xi[i].clone())
    }

    /// Projections of date index `t`, one per mode.
    pub fn at(&self, t: usize) -> Vec<f64> {
        self.xi.iter().map(|s| s[t]).collect()
    }
}

pub fn decompose(rf: &ReturnField, basis: &BasisSpec, n_modes: usize) -> Result<KLModel, KlError> {
    decompose_with(rf, basis, n_modes, Execution::default())
}

/// Kernel estimation, Galerkin assembly and eigen-solve in one call.
///
/// Eigenfunctions are oriented so that `∫ e_i > 0`; when the integral
/// vanishes, the leftmost grid value that is not ~0 is made positive.
pub fn decompose_with(
    rf: &ReturnField,
    basis: &BasisSpec,
    n_modes: usize,
    exec: Execution,
) -> Result<KLModel, KlError> {
    if n_modes > basis.size() {
        return Err(KlError::TooManyModes {
            requested: n_modes,
            available: basis.size(),
        });
    }
    let kernel = estimate_kernel_with(rf, exec)?;
    let (a, b) = assemble_galerkin_with(&kernel, basis, exec)?;
    let pairs = solve_gevp(&a, &b)?;

    let lambda_max = pairs.first().map_or(0.0, |p| p.value.max(0.0));
    let mut spectrum = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        if p.value > CLIP_TOL * lambda_max {
            spectrum.push(p.value);
        } else if p.value >= -CLIP_TOL * lambda_max {
            spectrum.push(0.0);
        } else {
            return Err(KlError::IndefiniteKernel { mode: i, value: p.value });
        }
    }

    let phi = basis.evaluate(&kernel.grid)?;
    let weights = quadrature::grid_weights(&kernel.grid);
    let modes = pairs
        .into_iter()
        .zip(&spectrum)
        .take(n_modes)
        .map(|(pair, &eigenvalue)| {
            let mut coeffs = pair.coeffs;
            let mut values: Vec<f64> = phi
                .rows()
                .into_iter()
                .map(|row| row.iter().zip(&coeffs).map(|(f, d)| f * d).sum())
                .collect();
            if orientation(&weights, &values) < 0.0 {
                coeffs.iter_mut().for_each(|c| *c = -*c);
                values.iter_mut().for_each(|v| *v = -*v);
            }
            EigenMode {
                eigenvalue,
                coeffs,
                values,
            }
        })
        .collect();

    Ok(KLModel {
        domain: Domain::of_grid(&kernel.grid),
        basis: basis.clone(),
        grid: kernel.grid,
        weights,
        modes,
        spectrum,
        mean_function: rf
            .mean_function()
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; rf.grid().len()]),
    })
}

/// +1 if the sampled function already has the canonical sign, −1 otherwise.
fn orientation(weights: &[f64], values: &[f64]) -> f64 {
    let integral: f64 = weights.iter().zip(values).map(|(w, v)| w * v).sum();
    if integral.abs() >= SIGN_TOL {
        return integral.signum();
    }
    values
        .iter()
        .find(|v| v.abs() > SIGN_TOL)
        .map_or(1.0, |v| v.signum())
}

/// `ξ_i(t) = (1/√λ_i)·Σ_j w_j u(t,x_j) e_i(x_j)` for every retained mode.
pub fn project(rf: &ReturnField, model: &KLModel) -> Result<ProjectionSeries, KlError> {
    project_with(rf, model, model.modes.len(), Execution::default())
}

/// Projections on the first `n_modes` modes.
pub fn project_with(
    rf: &ReturnField,
    model: &KLModel,
    n_modes: usize,
    exec: Execution,
) -> Result<ProjectionSeries, KlError> {
    if rf.grid() != &model.grid {
        return Err(KlError::GridMismatch);
    }
    if n_modes > model.modes.len() {
        return Err(KlError::TooManyModes {
            requested: n_modes,
            available: model.modes.len(),
        });
    }
    let modes = &model.modes[..n_modes];
    if let Some(i) = modes.iter().position(|m| !(m.eigenvalue > 0.0)) {
        return Err(KlError::ZeroEigenvalue { mode: i });
    }
    // fold the weights and 1/√λ into one vector per mode
    let kernels: Vec<Vec<f64>> = modes
        .iter()
        .map(|m| {
            let s = 1.0 / m.eigenvalue.sqrt();
            m.values.iter().zip(&model.weights).map(|(e, w)| e * w * s).collect()
        })
        .collect();
    let values = rf.values();
    let per_date = par::map_range(exec, values.nrows(), |t| {
        let row = values.row(t);
        kernels
            .iter()
            .map(|k| row.iter().zip(k).map(|(u, c)| u * c).sum::<f64>())
            .collect::<Vec<f64>>()
    });
    let xi = (0..n_modes)
        .map(|i| per_date.iter().map(|r| r[i]).collect())
        .collect();
    Ok(ProjectionSeries {
        dates: rf.dates().to_vec(),
        xi,
    })
}

/// Truncated expansion `Σ_{i<n} √λ_i·ξ_i·e_i(x)` on the grid; the mean
/// function is not added.
pub fn reconstruct(model: &KLModel, xi: &[f64], n_modes: usize) -> Result<Vec<f64>, KlError> {
    if n_modes > model.modes.len() {
        return Err(KlError::TooManyModes {
            requested: n_modes,
            available: model.modes.len(),
        });
    }
    if xi.len() < n_modes {
        return Err(KlError::ShapeMismatch {
            expected: n_modes,
            found: xi.len(),
        });
    }
    let mut out = vec![0.0; model.grid.len()];
    for (mode, &x) in model.modes.iter().zip(xi).take(n_modes) {
        let scale = mode.eigenvalue.sqrt() * x;
        for (o, e) in out.iter_mut().zip(&mode.values) {
            *o += scale * e;
        }
    }
    Ok(out)
}

/// Share `λ_i / Σ_j λ_j` of each retained mode, relative to the full spectrum.
pub fn explained_variance(model: &KLModel) -> Result<Vec<f64>, KlError> {
    let total: f64 = model.spectrum.iter().sum();
    if !(total > 0.0) {
        return Err(KlError::AllZeroSpectrum);
    }
    Ok(model.modes.iter().map(|m| m.eigenvalue / total).collect())
}
