//! Seeded synthetic vol cubes with a known KL structure.
//!
//! Modes are orthonormalized monomials on the grid, projections follow an
//! AR(1) with persistent innovation variance, and the cube is the
//! exponentiated cumulative sum of the truncated expansion on a base smile.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::kldecomp::quadrature::{grid_weights, inner};
use crate::series::variance;
use crate::volgrid::{Axis, FieldGrid, VolCubeSeries, VolGridError};

const BURN_IN: usize = 200;
const RANK_TOL: f64 = 1e-8;
/// Weight on the previous variance inside the clustering recursion.
const VARIANCE_MEMORY: f64 = 0.9;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("grid supports only {found} independent modes, {requested} requested")]
    RankDeficiency { requested: usize, found: usize },
    #[error(transparent)]
    Cube(#[from] VolGridError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub grid: FieldGrid,
    /// Eigenvalues, one per mode, strictly descending.
    pub lambdas: Vec<f64>,
    /// AR(1) coefficient per mode; missing entries are 0.
    pub ar_betas: Vec<f64>,
    /// Persistence of the innovation variance, in `[0, 1)`.
    pub vol_cluster: f64,
    /// Smile on the first date, one strictly positive value per grid point.
    pub base_smile: Vec<f64>,
    /// Number of simulated returns; the cube has one more date.
    pub dates: usize,
    pub seed: u64,
    pub start: NaiveDate,
    /// Forward written for every date, expiry and tenor.
    pub forward: f64,
    /// Coordinates of the axes the grid does not span.
    pub fixed_moneyness: f64,
    pub fixed_expiry: f64,
    pub fixed_tenor: f64,
}

impl SynthSpec {
    /// Smile spec on a moneyness line with a parabolic base smile.
    pub fn smile(points: Vec<f64>, lambdas: Vec<f64>, dates: usize, seed: u64) -> Self {
        let grid = FieldGrid::line(Axis::Moneyness, points);
        let base_smile = default_base(&grid);
        Self {
            grid,
            ar_betas: vec![0.0; lambdas.len()],
            lambdas,
            vol_cluster: 0.0,
            base_smile,
            dates,
            seed,
            start: NaiveDate::from_ymd_opt(2010, 1, 4).expect("valid date"),
            forward: 0.025,
            fixed_moneyness: 0.0,
            fixed_expiry: 5.0,
            fixed_tenor: 10.0,
        }
    }

    pub fn with_grid(mut self, grid: FieldGrid) -> Self {
        self.base_smile = default_base(&grid);
        self.grid = grid;
        self
    }

    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn beta(&self, mode: usize) -> f64 {
        self.ar_betas.get(mode).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.lambdas.is_empty() {
            return bad("at least one mode is required".into());
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return bad("eigenvalues must be positive".into());
        }
        if self.lambdas.windows(2).any(|w| !(w[0] > w[1])) {
            return bad("eigenvalues must be strictly descending".into());
        }
        if self.n_modes() > self.grid.len() {
            return Err(SynthError::RankDeficiency {
                requested: self.n_modes(),
                found: self.grid.len(),
            });
        }
        if let Some(b) = self.ar_betas.iter().find(|b| !(b.abs() < 1.0)) {
            return bad(format!("AR coefficient {b} is not stationary"));
        }
        if !(0.0..1.0).contains(&self.vol_cluster) {
            return bad(format!("vol_cluster {} not in [0, 1)", self.vol_cluster));
        }
        if self.base_smile.len() != self.grid.len() {
            return bad(format!(
                "base smile has {} values for {} grid points",
                self.base_smile.len(),
                self.grid.len()
            ));
        }
        if self.base_smile.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("base smile must be strictly positive".into());
        }
        if self.dates < 2 {
            return bad("need at least 2 dates".into());
        }
        Ok(())
    }
}

/// Typical normal-vol shape in decimal units: a smile along moneyness,
/// a mild hump along expiry and a slow decay along tenor.
pub fn default_base(grid: &FieldGrid) -> Vec<f64> {
    let axes = grid.axes();
    (0..grid.len())
        .map(|i| {
            let mut v = 0.0065;
            for (axis, x) in axes.iter().zip(grid.coords(i)) {
                v *= match axis {
                    Axis::Moneyness => 1.0 + 100.0 * x * x,
                    Axis::Expiry => 1.0 + 0.15 * (-(x - 3.0).powi(2) / 20.0).exp(),
                    Axis::Tenor => 1.0 - 0.1 * (x / 30.0).min(1.0),
                };
            }
            v
        })
        .collect()
}

/// Reference coordinate of every point on every axis, mapped into `[−1, 1]`.
fn reference_coords(grid: &FieldGrid) -> Vec<Vec<f64>> {
    let bounds: Vec<(f64, f64)> = grid
        .axis_points()
        .iter()
        .map(|p| (p[0], p[p.len() - 1]))
        .collect();
    (0..grid.len())
        .map(|i| {
            grid.coords(i)
                .iter()
                .zip(&bounds)
                .map(|(x, (a, b))| if b > a { (2.0 * x - a - b) / (b - a) } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Exponent pairs of the graded monomials `z₁^a z₂^b`, by total degree.
fn monomial_exponents(dimension: usize, max_degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for d in 0..=max_degree as u32 {
        if dimension == 1 {
            out.push(vec![d]);
        } else {
            for a in (0..=d).rev() {
                out.push(vec![a, d - a]);
            }
        }
    }
    out
}

/// `r` functions orthonormal under the trapezoid inner product, from
/// Gram-Schmidt on graded monomials (two passes per vector). The first is
/// the positive constant.
pub fn make_orthonormal_modes(grid: &FieldGrid, r: usize) -> Result<Vec<Vec<f64>>, SynthError> {
    let w = grid_weights(grid);
    let z = reference_coords(grid);
    let max_degree = grid.axis_points().iter().map(|p| p.len()).max().unwrap_or(0);
    let mut modes: Vec<Vec<f64>> = Vec::with_capacity(r);
    for exps in monomial_exponents(grid.dimension(), max_degree) {
        if modes.len() == r {
            break;
        }
        let mut v: Vec<f64> = z
            .iter()
            .map(|c| c.iter().zip(&exps).map(|(x, e)| x.powi(*e as i32)).product())
            .collect();
        let norm0 = inner(&w, &v, &v).sqrt();
        for _ in 0..2 {
            for m in &modes {
                let c = inner(&w, &v, m);
                v.iter_mut().zip(m).for_each(|(a, b)| *a -= c * b);
            }
        }
        let norm = inner(&w, &v, &v).sqrt();
        if !(norm > RANK_TOL * norm0) {
            continue;
        }
        v.iter_mut().for_each(|a| *a /= norm);
        modes.push(v);
    }
    if modes.len() < r {
        return Err(SynthError::RankDeficiency {
            requested: r,
            found: modes.len(),
        });
    }
    Ok(modes)
}

/// Projection series per mode, each rescaled to unit sample variance.
///
/// `ξ(t) = β·ξ(t−1) + s(t)·z(t)` with
/// `s²(t+1) = (1−φ) + φ·(0.9·s²(t) + 0.1·(s(t)z(t))²)`; mode `i` draws from
/// stream `i` of a ChaCha8 generator seeded with `seed`.
pub fn simulate_projections(spec: &SynthSpec) -> Result<Vec<Vec<f64>>, SynthError> {
    spec.validate()?;
    let phi = spec.vol_cluster;
    Ok((0..spec.n_modes())
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let beta = spec.beta(i);
            let (mut xi, mut s2) = (0.0f64, 1.0f64);
            let mut out = Vec::with_capacity(spec.dates);
            for t in 0..BURN_IN + spec.dates {
                let z: f64 = StandardNormal.sample(&mut rng);
                let e = s2.sqrt() * z;
                xi = beta * xi + e;
                s2 = (1.0 - phi) + phi * (VARIANCE_MEMORY * s2 + (1.0 - VARIANCE_MEMORY) * e * e);
                if t >= BURN_IN {
                    out.push(xi);
                }
            }
            let sd = variance(&out).sqrt();
            out.iter_mut().for_each(|x| *x /= sd);
            out
        })
        .collect())
}

/// Weekdays from `start` (moved forward to a weekday if needed).
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut d = start;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

/// `Σ √λ_i·ξ_i(t)·e_i(x)` for every date.
pub fn synthetic_returns(spec: &SynthSpec, modes: &[Vec<f64>], xi: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = spec.grid.len();
    (0..spec.dates)
        .map(|t| {
            let mut u = vec![0.0; n];
            for ((lambda, mode), series) in spec.lambdas.iter().zip(modes).zip(xi) {
                let c = lambda.sqrt() * series[t];
                u.iter_mut().zip(mode).for_each(|(a, e)| *a += c * e);
            }
            u
        })
        .collect()
}

/// `I(t) = I(t−1)·exp(u(t))` from the base smile, written as a cube.
pub fn synthesize_cube(
    spec: &SynthSpec,
    modes: &[Vec<f64>],
    xi: &[Vec<f64>],
) -> Result<VolCubeSeries, SynthError> {
    spec.validate()?;
    if modes.len() != spec.n_modes() || xi.len() != spec.n_modes() || xi.iter().any(|s| s.len() != spec.dates) {
        return Err(SynthError::InvalidSpec("modes or projections do not match the spec".into()));
    }

    let grid = &spec.grid;
    let axes = grid.axes();
    let axis_grid = |axis: Axis, fixed: f64| -> Vec<f64> {
        match axes.iter().position(|a| *a == axis) {
            Some(k) => grid.axis_points()[k].to_vec(),
            None => vec![fixed],
        }
    };
    let moneyness = axis_grid(Axis::Moneyness, spec.fixed_moneyness);
    let expiries = axis_grid(Axis::Expiry, spec.fixed_expiry);
    let tenors = axis_grid(Axis::Tenor, spec.fixed_tenor);
    let (nm, ne, nt) = (moneyness.len(), expiries.len(), tenors.len());
    if nm * ne * nt != grid.len() {
        return Err(SynthError::InvalidSpec("grid axes must be distinct".into()));
    }

    // cube offset of each flattened grid point within one date
    let offsets: Vec<usize> = (0..grid.len())
        .map(|p| {
            let c = grid.coords(p);
            let mut idx = [0usize; 3];
            for (axis, x) in axes.iter().zip(&c) {
                let (slot, g) = match axis {
                    Axis::Moneyness => (0, &moneyness),
                    Axis::Expiry => (1, &expiries),
                    Axis::Tenor => (2, &tenors),
                };
                idx[slot] = g.iter().position(|v| v == x).expect("grid coordinate");
            }
            (idx[0] * ne + idx[1]) * nt + idx[2]
        })
        .collect();

    let per_date = grid.len();
    let n_dates = spec.dates + 1;
    let mut vols = vec![0.0; n_dates * per_date];
    let mut level = spec.base_smile.clone();
    for (t, u) in std::iter::once(None)
        .chain(synthetic_returns(spec, modes, xi).into_iter().map(Some))
        .enumerate()
    {
        if let Some(u) = u {
            level.iter_mut().zip(&u).for_each(|(l, r)| *l *= r.exp());
        }
        for (p, &off) in offsets.iter().enumerate() {
            vols[t * per_date + off] = level[p];
        }
    }
    let forwards = vec![spec.forward; n_dates * ne * nt];
    Ok(VolCubeSeries::new(
        business_days(spec.start, n_dates),
        moneyness,
        expiries,
        tenors,
        vols,
        Some(forwards),
    )?)
}

/// Everything the generator produces for one spec.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub modes: Vec<Vec<f64>>,
    pub xi: Vec<Vec<f64>>,
    pub cube: VolCubeSeries,
}

pub fn synthesize(spec: &SynthSpec) -> Result<SynthOutput, SynthError> {
    let modes = make_orthonormal_modes(&spec.grid, spec.n_modes())?;
    let xi = simulate_projections(spec)?;
    let cube = synthesize_cube(spec, &modes, &xi)?;
    Ok(SynthOutput { modes, xi, cube })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volgrid::{extract_slice, log_returns, SliceSpec};

    fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn constant_mode() {
        let g = FieldGrid::line(Axis::Moneyness, uniform(-0.02, 0.02, 9));
        let m = make_orthonormal_modes(&g, 1).unwrap();
        for v in &m[0] {
            assert!((v - 1.0 / 0.04f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn second_mode_is_scaled_legendre() {
        let g = FieldGrid::line(Axis::Moneyness, uniform(-1.0, 1.0, 2001));
        let m = make_orthonormal_modes(&g, 2).unwrap();
        for (x, v) in uniform(-1.0, 1.0, 2001).iter().zip(&m[1]) {
            assert!((v - 1.5f64.sqrt() * x).abs() < 1e-3);
        }
    }

    #[test]
    fn orthonormal_on_a_lattice() {
        let g = FieldGrid::lattice([Axis::Expiry, Axis::Tenor], uniform(1.0, 10.0, 6), uniform(2.0, 30.0, 5));
        let w = grid_weights(&g);
        let m = make_orthonormal_modes(&g, 6).unwrap();
        for (i, a) in m.iter().enumerate() {
            for (j, b) in m.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((inner(&w, a, b) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rank_deficiency() {
        let g = FieldGrid::line(Axis::Moneyness, uniform(0.0, 1.0, 3));
        assert!(matches!(
            make_orthonormal_modes(&g, 4),
            Err(SynthError::RankDeficiency { requested: 4, found: 3 })
        ));
    }

    #[test]
    fn iid_case_has_unit_variance() {
        let spec = SynthSpec::smile(uniform(-0.02, 0.02, 5), vec![1.0], 1000, 3);
        let xi = simulate_projections(&spec).unwrap();
        assert!((variance(&xi[0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_stream_separated() {
        let spec = SynthSpec::smile(uniform(-0.02, 0.02, 5), vec![2.0, 1.0], 300, 42);
        let a = simulate_projections(&spec).unwrap();
        let b = simulate_projections(&spec).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        let other = SynthSpec { seed: 43, ..spec };
        assert_ne!(simulate_projections(&other).unwrap()[0], a[0]);
    }

    #[test]
    fn zero_projections_give_a_constant_cube() {
        let spec = SynthSpec::smile(uniform(-0.02, 0.02, 5), vec![1e-6], 4, 1);
        let modes = make_orthonormal_modes(&spec.grid, 1).unwrap();
        let cube = synthesize_cube(&spec, &modes, &[vec![0.0; 4]]).unwrap();
        assert_eq!(cube.shape(), (5, 5, 1, 1));
        for d in 0..5 {
            for m in 0..5 {
                assert_eq!(cube.vol(d, m, 0, 0), spec.base_smile[m]);
            }
        }
    }

    #[test]
    fn log_returns_invert_the_construction() {
        let spec = SynthSpec::smile(uniform(-0.02, 0.02, 7), vec![9e-6, 9e-7, 1e-7], 50, 8);
        let out = synthesize(&spec).unwrap();
        let fs = extract_slice(&out.cube, &SliceSpec::smile(5.0, 10.0)).unwrap();
        let rf = log_returns(&fs).unwrap();
        let want = synthetic_returns(&spec, &out.modes, &out.xi);
        for (t, row) in want.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((rf.values()[[t, j]] - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn surface_cube_layout() {
        let g = FieldGrid::lattice([Axis::Expiry, Axis::Tenor], vec![1.0, 2.0, 5.0], vec![2.0, 10.0]);
        let spec = SynthSpec::smile(vec![0.0], vec![1e-6, 5e-7], 3, 2).with_grid(g.clone());
        let out = synthesize(&spec).unwrap();
        assert_eq!(out.cube.shape(), (4, 1, 3, 2));
        assert_eq!(out.cube.vol(0, 0, 2, 1), spec.base_smile[5]);
        assert_eq!(out.cube.forward(3, 1, 1), Some(0.025));
    }

    #[test]
    fn business_calendar() {
        // 2010-01-08 is a Friday
        let d = business_days(NaiveDate::from_ymd_opt(2010, 1, 8).unwrap(), 2);
        assert_eq!(d[1], NaiveDate::from_ymd_opt(2010, 1, 11).unwrap());
        let sat = business_days(NaiveDate::from_ymd_opt(2010, 1, 9).unwrap(), 1);
        assert_eq!(sat[0].weekday(), Weekday::Mon);
    }

    #[test]
    fn spec_validation() {
        let mut spec = SynthSpec::smile(uniform(-0.02, 0.02, 5), vec![1.0, 2.0], 10, 1);
        assert!(spec.validate().is_err());
        spec.lambdas = vec![2.0, 1.0];
        spec.vol_cluster = 1.0;
        assert!(spec.validate().is_err());
        spec.vol_cluster = 0.5;
        spec.base_smile[0] = 0.0;
        assert!(spec.validate().is_err());
    }
}
