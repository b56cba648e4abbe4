//! Implied-volatility cube time series and the field series cut from it.
//!
//! Vols are absolute decimals in normal (Bachelier) units: `0.0065` is 65
//! normal basis points. Moneyness is `strike − forward`, also in decimal
//! rate units. Expiries and tenors are in years.

mod ingest;

pub use self::ingest::{load_cube_csv, read_cube_csv, write_cube_csv};

use std::fmt;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coordinates closer than this are the same grid node.
const COORD_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum VolGridError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad header {found:?}: expected date,expiry_years,tenor_years,moneyness,vol[,forward]")]
    BadHeader { found: String },
    #[error("line {line}: unparseable row: {reason}")]
    UnparseableRow { line: u64, reason: String },
    #[error("line {line}: non-positive or non-finite vol {vol}")]
    NonPositiveVol { line: u64, vol: f64 },
    #[error("line {line}: duplicate of the row on line {first_line}")]
    DuplicateRow { line: u64, first_line: u64 },
    #[error("line {line}: forward {found} disagrees with {expected} given earlier for the same date/expiry/tenor")]
    ForwardMismatch { line: u64, found: f64, expected: f64 },
    #[error("missing cell: date {date}, moneyness {moneyness}, expiry {expiry}, tenor {tenor}")]
    MissingCell {
        date: NaiveDate,
        moneyness: f64,
        expiry: f64,
        tenor: f64,
    },
    #[error("file contains no data rows")]
    Empty,
    #[error("invalid cube: {0}")]
    InvalidCube(String),
    #[error("{axis} = {value} is not a node of the {axis} grid")]
    OffGridCoordinate { axis: Axis, value: f64 },
    #[error("slice along {axis:?} needs a fixed {missing}")]
    MissingFixedCoordinate { axis: SliceAxis, missing: Axis },
    #[error("need at least 2 dates for log-returns, found {found}")]
    TooFewDates { found: usize },
    #[error("non-positive value {value} on {date} at grid point {point}")]
    NonPositiveValue {
        date: NaiveDate,
        point: usize,
        value: f64,
    },
    #[error("return field is already centered")]
    AlreadyCentered,
}

/// One of the three parameters indexing the cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Moneyness,
    Expiry,
    Tenor,
}

impl Axis {
    pub fn unit(self) -> &'static str {
        match self {
            Axis::Moneyness => "decimal rate",
            Axis::Expiry | Axis::Tenor => "years",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Moneyness => "moneyness",
            Axis::Expiry => "expiry",
            Axis::Tenor => "tenor",
        })
    }
}

/// Dated grid of implied normal vols indexed by (moneyness, expiry, tenor).
#[derive(Debug, Clone, PartialEq)]
pub struct VolCubeSeries {
    dates: Vec<NaiveDate>,
    moneyness: Vec<f64>,
    expiries: Vec<f64>,
    tenors: Vec<f64>,
    /// Row-major over (date, moneyness, expiry, tenor).
    vols: Vec<f64>,
    /// Row-major over (date, expiry, tenor).
    forwards: Option<Vec<f64>>,
}

fn strictly_increasing<T: PartialOrd>(xs: &[T]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

impl VolCubeSeries {
    pub fn new(
        dates: Vec<NaiveDate>,
        moneyness: Vec<f64>,
        expiries: Vec<f64>,
        tenors: Vec<f64>,
        vols: Vec<f64>,
        forwards: Option<Vec<f64>>,
    ) -> Result<Self, VolGridError> {
        let invalid = |msg: &str| Err(VolGridError::InvalidCube(msg.to_string()));
        if dates.is_empty() || moneyness.is_empty() || expiries.is_empty() || tenors.is_empty() {
            return invalid("every axis needs at least one entry");
        }
        if !strictly_increasing(&dates) {
            return invalid("dates must be strictly increasing");
        }
        for (name, g) in [("moneyness", &moneyness), ("expiry", &expiries), ("tenor", &tenors)] {
            if !g.iter().all(|x| x.is_finite()) || !strictly_increasing(g) {
                return Err(VolGridError::InvalidCube(format!(
                    "{name} grid must be finite and strictly increasing"
                )));
            }
        }
        let n = dates.len() * moneyness.len() * expiries.len() * tenors.len();
        if vols.len() != n {
            return Err(VolGridError::InvalidCube(format!(
                "expected {n} vols, got {}",
                vols.len()
            )));
        }
        if let Some(v) = vols.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(VolGridError::InvalidCube(format!("vol {v} is not strictly positive")));
        }
        if let Some(f) = &forwards {
            if f.len() != dates.len() * expiries.len() * tenors.len() {
                return invalid("forward array has the wrong length");
            }
            if !f.iter().all(|x| x.is_finite()) {
                return invalid("forwards must be finite");
            }
        }
        Ok(Self {
            dates,
            moneyness,
            expiries,
            tenors,
            vols,
            forwards,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn moneyness_grid(&self) -> &[f64] {
        &self.moneyness
    }

    pub fn expiry_grid(&self) -> &[f64] {
        &self.expiries
    }

    pub fn tenor_grid(&self) -> &[f64] {
        &self.tenors
    }

    pub fn grid(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::Moneyness => &self.moneyness,
            Axis::Expiry => &self.expiries,
            Axis::Tenor => &self.tenors,
        }
    }

    /// (dates, moneyness, expiry, tenor)
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (
            self.dates.len(),
            self.moneyness.len(),
            self.expiries.len(),
            self.tenors.len(),
        )
    }

    fn index(&self, d: usize, m: usize, e: usize, t: usize) -> usize {
        ((d * self.moneyness.len() + m) * self.expiries.len() + e) * self.tenors.len() + t
    }

    pub fn vol(&self, d: usize, m: usize, e: usize, t: usize) -> f64 {
        self.vols[self.index(d, m, e, t)]
    }

    pub fn has_forwards(&self) -> bool {
        self.forwards.is_some()
    }

    pub fn forward(&self, d: usize, e: usize, t: usize) -> Option<f64> {
        self.forwards
            .as_ref()
            .map(|f| f[(d * self.expiries.len() + e) * self.tenors.len() + t])
    }

    /// Index of `value` on the grid of `axis`.
    pub fn locate(&self, axis: Axis, value: f64) -> Result<usize, VolGridError> {
        self.grid(axis)
            .iter()
            .position(|g| (g - value).abs() <= COORD_TOL)
            .ok_or(VolGridError::OffGridCoordinate { axis, value })
    }
}

/// Which parameter(s) vary in a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SliceAxis {
    Moneyness,
    Expiry,
    Tenor,
    /// 2-D expiry×tenor surface at fixed moneyness.
    ExpiryTenor,
}

/// Slice selector: the varying axis plus values for the fixed parameters.
/// Fixed values for the varying axis are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub axis: SliceAxis,
    pub moneyness: Option<f64>,
    pub expiry: Option<f64>,
    pub tenor: Option<f64>,
}

impl SliceSpec {
    /// Moneyness-indexed smile at fixed expiry and tenor.
    pub fn smile(expiry: f64, tenor: f64) -> Self {
        Self {
            axis: SliceAxis::Moneyness,
            moneyness: None,
            expiry: Some(expiry),
            tenor: Some(tenor),
        }
    }

    /// Expiry×tenor surface at fixed moneyness.
    pub fn surface(moneyness: f64) -> Self {
        Self {
            axis: SliceAxis::ExpiryTenor,
            moneyness: Some(moneyness),
            expiry: None,
            tenor: None,
        }
    }
}

/// Sample points of a field: a 1-D line or a 2-D rectangular lattice.
///
/// Lattice points are flattened with the first axis outermost:
/// point `i * second.len() + j` sits at `(first[i], second[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FieldGrid {
    Line {
        axis: Axis,
        points: Vec<f64>,
    },
    Lattice {
        axes: [Axis; 2],
        first: Vec<f64>,
        second: Vec<f64>,
    },
}

impl FieldGrid {
    pub fn line(axis: Axis, points: Vec<f64>) -> Self {
        FieldGrid::Line { axis, points }
    }

    pub fn lattice(axes: [Axis; 2], first: Vec<f64>, second: Vec<f64>) -> Self {
        FieldGrid::Lattice { axes, first, second }
    }

    pub fn len(&self) -> usize {
        match self {
            FieldGrid::Line { points, .. } => points.len(),
            FieldGrid::Lattice { first, second, .. } => first.len() * second.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dimension(&self) -> usize {
        match self {
            FieldGrid::Line { .. } => 1,
            FieldGrid::Lattice { .. } => 2,
        }
    }

    pub fn axes(&self) -> Vec<Axis> {
        match self {
            FieldGrid::Line { axis, .. } => vec![*axis],
            FieldGrid::Lattice { axes, .. } => axes.to_vec(),
        }
    }

    /// Node coordinates per axis.
    pub fn axis_points(&self) -> Vec<&[f64]> {
        match self {
            FieldGrid::Line { points, .. } => vec![points.as_slice()],
            FieldGrid::Lattice { first, second, .. } => vec![first.as_slice(), second.as_slice()],
        }
    }

    /// Coordinates of flattened point `i`, one entry per axis.
    pub fn coords(&self, i: usize) -> Vec<f64> {
        match self {
            FieldGrid::Line { points, .. } => vec![points[i]],
            FieldGrid::Lattice { first, second, .. } => {
                vec![first[i / second.len()], second[i % second.len()]]
            }
        }
    }
}

/// Per-date function samples on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries {
    pub dates: Vec<NaiveDate>,
    pub grid: FieldGrid,
    /// `values[[t, j]]` is the sample at date `t` and grid point `j`.
    pub values: Array2<f64>,
}

impl FieldSeries {
    pub fn new(dates: Vec<NaiveDate>, grid: FieldGrid, values: Array2<f64>) -> Self {
        assert_eq!(values.nrows(), dates.len(), "one row per date");
        assert_eq!(values.ncols(), grid.len(), "one column per grid point");
        Self { dates, grid, values }
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Samples of date `t` as an owned vector.
    pub fn sample(&self, t: usize) -> Vec<f64> {
        self.values.row(t).to_vec()
    }

    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }
}

/// Log-returns of a field series, optionally centered per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnField {
    series: FieldSeries,
    mean_function: Option<Vec<f64>>,
    centered: bool,
}

impl ReturnField {
    /// Wraps raw (uncentered) return samples.
    pub fn from_returns(series: FieldSeries) -> Self {
        Self {
            series,
            mean_function: None,
            centered: false,
        }
    }

    pub fn series(&self) -> &FieldSeries {
        &self.series
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.series.dates
    }

    pub fn grid(&self) -> &FieldGrid {
        &self.series.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.series.values
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Per-point sample mean removed by [`center`]; `None` when uncentered.
    pub fn mean_function(&self) -> Option<&[f64]> {
        self.mean_function.as_deref()
    }

    /// Returns with the mean function added back.
    pub fn uncentered_values(&self) -> Array2<f64> {
        let mut v = self.series.values.clone();
        if let Some(m) = &self.mean_function {
            for mut row in v.rows_mut() {
                for (x, mu) in row.iter_mut().zip(m) {
                    *x += mu;
                }
            }
        }
        v
    }
}

/// Cuts a 1-D smile or 2-D surface series out of the cube.
pub fn extract_slice(cube: &VolCubeSeries, spec: &SliceSpec) -> Result<FieldSeries, VolGridError> {
    let fixed = |axis: Axis, value: Option<f64>| -> Result<usize, VolGridError> {
        let v = value.ok_or(VolGridError::MissingFixedCoordinate {
            axis: spec.axis,
            missing: axis,
        })?;
        cube.locate(axis, v)
    };
    let nd = cube.dates.len();
    match spec.axis {
        SliceAxis::ExpiryTenor => {
            let m = fixed(Axis::Moneyness, spec.moneyness)?;
            let (ne, nt) = (cube.expiries.len(), cube.tenors.len());
            let values = Array2::from_shape_fn((nd, ne * nt), |(d, j)| cube.vol(d, m, j / nt, j % nt));
            let grid = FieldGrid::lattice(
                [Axis::Expiry, Axis::Tenor],
                cube.expiries.clone(),
                cube.tenors.clone(),
            );
            Ok(FieldSeries::new(cube.dates.clone(), grid, values))
        }
        SliceAxis::Moneyness => {
            let e = fixed(Axis::Expiry, spec.expiry)?;
            let t = fixed(Axis::Tenor, spec.tenor)?;
            let values = Array2::from_shape_fn((nd, cube.moneyness.len()), |(d, m)| cube.vol(d, m, e, t));
            let grid = FieldGrid::line(Axis::Moneyness, cube.moneyness.clone());
            Ok(FieldSeries::new(cube.dates.clone(), grid, values))
        }
        SliceAxis::Expiry => {
            let m = fixed(Axis::Moneyness, spec.moneyness)?;
            let t = fixed(Axis::Tenor, spec.tenor)?;
            let values = Array2::from_shape_fn((nd, cube.expiries.len()), |(d, e)| cube.vol(d, m, e, t));
            let grid = FieldGrid::line(Axis::Expiry, cube.expiries.clone());
            Ok(FieldSeries::new(cube.dates.clone(), grid, values))
        }
        SliceAxis::Tenor => {
            let m = fixed(Axis::Moneyness, spec.moneyness)?;
            let e = fixed(Axis::Expiry, spec.expiry)?;
            let values = Array2::from_shape_fn((nd, cube.tenors.len()), |(d, t)| cube.vol(d, m, e, t));
            let grid = FieldGrid::line(Axis::Tenor, cube.tenors.clone());
            Ok(FieldSeries::new(cube.dates.clone(), grid, values))
        }
    }
}

/// `u(t,x) = ln I(t,x) − ln I(t−1,x)`; the first date is dropped.
pub fn log_returns(fs: &FieldSeries) -> Result<ReturnField, VolGridError> {
    if fs.len() < 2 {
        return Err(VolGridError::TooFewDates { found: fs.len() });
    }
    for ((t, j), &v) in fs.values.indexed_iter() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(VolGridError::NonPositiveValue {
                date: fs.dates[t],
                point: j,
                value: v,
            });
        }
    }
    let n = fs.len() - 1;
    let values = Array2::from_shape_fn((n, fs.grid.len()), |(t, j)| {
        fs.values[[t + 1, j]].ln() - fs.values[[t, j]].ln()
    });
    Ok(ReturnField::from_returns(FieldSeries::new(
        fs.dates[1..].to_vec(),
        fs.grid.clone(),
        values,
    )))
}

/// Subtracts the per-point sample mean and keeps it as the mean function.
pub fn center(rf: &ReturnField) -> Result<ReturnField, VolGridError> {
    if rf.centered {
        return Err(VolGridError::AlreadyCentered);
    }
    let values = &rf.series.values;
    let n = values.nrows() as f64;
    let mean: Vec<f64> = values.columns().into_iter().map(|c| c.sum() / n).collect();
    let mut centered = values.clone();
    for mut row in centered.rows_mut() {
        for (x, mu) in row.iter_mut().zip(&mean) {
            *x -= mu;
        }
    }
    Ok(ReturnField {
        series: FieldSeries::new(rf.series.dates.clone(), rf.series.grid.clone(), centered),
        mean_function: Some(mean),
        centered: true,
    })
}
