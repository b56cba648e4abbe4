use ndarray::Array2;

use super::KlError;
use crate::par::{self, Execution};
use crate::volgrid::{FieldGrid, ReturnField};

/// Empirical covariance kernel `k̂(x_j, x_k) = (1/T)·Σ_t u(t,x_j)·u(t,x_k)`
/// of a centered return field, sampled on its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalKernel {
    pub grid: FieldGrid,
    pub values: Array2<f64>,
    pub sample_count: usize,
}

impl EmpiricalKernel {
    pub fn trace(&self) -> f64 {
        self.values.diag().sum()
    }
}

pub fn estimate_kernel(rf: &ReturnField) -> Result<EmpiricalKernel, KlError> {
    estimate_kernel_with(rf, Execution::default())
}

/// [`estimate_kernel`] with an explicit execution strategy. Rows of the upper
/// triangle are independent and computed concurrently; the lower triangle is
/// a mirror, so the result is symmetric bit for bit.
pub fn estimate_kernel_with(rf: &ReturnField, exec: Execution) -> Result<EmpiricalKernel, KlError> {
    if !rf.is_centered() {
        return Err(KlError::NotCentered);
    }
    let t = rf.values().nrows();
    if t < 2 {
        return Err(KlError::TooFewSamples { found: t });
    }
    // column-major copy: one contiguous time series per grid point
    let cols = rf.values().t().as_standard_layout().into_owned();
    let p = cols.nrows();
    let inv_t = 1.0 / t as f64;
    let rows = par::map_range(exec, p, |j| {
        let uj = cols.row(j);
        (j..p)
            .map(|k| {
                let uk = cols.row(k);
                uj.iter().zip(uk.iter()).map(|(a, b)| a * b).sum::<f64>() * inv_t
            })
            .collect::<Vec<f64>>()
    });
    let mut values = Array2::<f64>::zeros((p, p));
    for (j, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            values[[j, j + off]] = v;
            values[[j + off, j]] = v;
        }
    }
    Ok(EmpiricalKernel {
        grid: rf.grid().clone(),
        values,
        sample_count: t,
    })
}
