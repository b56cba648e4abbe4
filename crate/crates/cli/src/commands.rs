use serde::{Deserialize, Serialize};

use volrisk::backtest::{backtest, hit_sequence, Tail};
use volrisk::bachelier::{check_smiles, SmileCase, Violation};
use volrisk::fhs::{combine, extreme_log_move, extreme_path, forecast_modes, ModeForecast, Scenario};
use volrisk::kldecomp::{decompose_with, explained_variance, project_with, BasisSpec, KLModel, ProjectionSeries};
use volrisk::synth::{synthesize, SynthSpec};
use volrisk::volgrid::{
    center, extract_slice, load_cube_csv, log_returns, write_cube_csv, Axis, FieldGrid, FieldSeries, SliceAxis,
    VolCubeSeries,
};
use volrisk::Execution;

use crate::config::{parse_grid, PipelineConfig};
use crate::error::CliError;
use crate::output::{Manifest, OutputDir};

pub fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::Moneyness => "moneyness",
        Axis::Expiry => "expiry",
        Axis::Tenor => "tenor",
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub axes: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
    pub ar_betas: Vec<f64>,
    pub vol_cluster: f64,
    /// Orthonormal modes used to build the returns, one row per mode.
    pub modes: Vec<Vec<f64>>,
}

pub fn synth_spec(cfg: &PipelineConfig) -> Result<SynthSpec, CliError> {
    let s = &cfg.synth;
    let mut lambdas = s.lambdas.clone();
    if cfg.modes == 0 {
        return Err(CliError::Input("modes must be at least 1".into()));
    }
    if lambdas.is_empty() {
        return Err(CliError::Input("synth.lambdas is empty".into()));
    }
    lambdas.truncate(cfg.modes);
    while lambdas.len() < cfg.modes {
        let last = lambdas[lambdas.len() - 1];
        lambdas.push(last / 10.0);
    }
    let grid = parse_grid(&s.grid)?;
    let mut spec = match &grid {
        FieldGrid::Line { points, .. } => SynthSpec::smile(points.clone(), lambdas, s.dates, cfg.seed),
        FieldGrid::Lattice { .. } => SynthSpec::smile(vec![0.0], lambdas, s.dates, cfg.seed).with_grid(grid),
    };
    spec.ar_betas = s.betas.clone();
    spec.vol_cluster = s.vol_cluster;
    spec.forward = s.forward;
    spec.validate()?;
    Ok(spec)
}

pub fn run_synth(cfg: &PipelineConfig) -> Result<Manifest, CliError> {
    let spec = synth_spec(cfg)?;
    let out = synthesize(&spec)?;
    let mut dir = OutputDir::create(&cfg.out)?;
    let mut buf = Vec::new();
    write_cube_csv(&out.cube, &mut buf)?;
    dir.write("cube.csv", &buf)?;
    let truth = SynthTruth {
        axes: spec.grid.axes().into_iter().map(|a| axis_name(a).to_string()).collect(),
        points: spec.grid.axis_points().into_iter().map(<[f64]>::to_vec).collect(),
        lambdas: spec.lambdas.clone(),
        ar_betas: (0..spec.n_modes()).map(|i| spec.beta(i)).collect(),
        vol_cluster: spec.vol_cluster,
        modes: out.modes.clone(),
    };
    dir.write_json("truth.json", &truth)?;
    let (d, m, e, t) = out.cube.shape();
    println!("synthetic cube: {d} dates × {m} moneyness × {e} expiries × {t} tenors");
    if spec.grid.dimension() == 2 {
        println!("surface slice: slice.axis=expiry-tenor slice.moneyness={}", spec.fixed_moneyness);
    } else {
        println!("smile slice: slice.expiry={} slice.tenor={}", spec.fixed_expiry, spec.fixed_tenor);
    }
    dir.finish("synth", cfg)
}

// ---------------------------------------------------------------- analysis

pub struct Analysis {
    pub cube: VolCubeSeries,
    pub levels: FieldSeries,
    pub model: KLModel,
    pub proj: ProjectionSeries,
}

pub fn load_input(cfg: &PipelineConfig) -> Result<VolCubeSeries, CliError> {
    let path = cfg
        .input
        .as_deref()
        .ok_or_else(|| CliError::Input("no input cube; pass --input or set input in the config".into()))?;
    if !path.is_file() {
        return Err(CliError::Input(format!("input cube {} does not exist", path.display())));
    }
    Ok(load_cube_csv(path)?)
}

pub fn analyse(cfg: &PipelineConfig, exec: Execution) -> Result<Analysis, CliError> {
    let cube = load_input(cfg)?;
    let levels = extract_slice(&cube, &cfg.slice)?;
    let returns = center(&log_returns(&levels)?)?;
    let basis = match cfg.basis_degree {
        Some(d) => BasisSpec::uniform(returns.grid(), d),
        None => BasisSpec::default_for(returns.grid()),
    };
    log::info!(
        "{} dates, {} grid points, basis {:?}",
        returns.dates().len(),
        returns.grid().len(),
        basis.degrees
    );
    let model = decompose_with(&returns, &basis, cfg.modes, exec)?;
    let proj = project_with(&returns, &model, cfg.modes, exec)?;
    Ok(Analysis {
        cube,
        levels,
        model,
        proj,
    })
}

// ---------------------------------------------------------------- decompose

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub axes: Vec<String>,
    pub points: usize,
    pub dates: usize,
    pub basis_degrees: Vec<usize>,
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Every eigenvalue of the discretized problem.
    pub spectrum: Vec<f64>,
    pub explained: Vec<f64>,
    pub cumulative: Vec<f64>,
}

pub fn spectrum_report(a: &Analysis) -> Result<SpectrumReport, CliError> {
    let explained = explained_variance(&a.model)?;
    let cumulative = explained
        .iter()
        .scan(0.0, |s, v| {
            *s += v;
            Some(*s)
        })
        .collect();
    Ok(SpectrumReport {
        axes: a.model.grid.axes().into_iter().map(|x| axis_name(x).to_string()).collect(),
        points: a.model.grid.len(),
        dates: a.proj.dates.len(),
        basis_degrees: a.model.basis.degrees.clone(),
        eigenvalues: a.model.eigenvalues(),
        spectrum: a.model.spectrum.clone(),
        explained,
        cumulative,
    })
}

pub fn run_decompose(cfg: &PipelineConfig, exec: Execution) -> Result<Manifest, CliError> {
    let a = analyse(cfg, exec)?;
    let report = spectrum_report(&a)?;
    let mut dir = OutputDir::create(&cfg.out)?;
    dir.write_json("spectrum.json", &report)?;

    let r = a.model.modes.len();
    let mut header: Vec<String> = report.axes.clone();
    header.push("mean".into());
    header.extend((1..=r).map(|i| format!("e{i}")));
    let rows: Vec<Vec<String>> = (0..a.model.grid.len())
        .map(|j| {
            let mut row: Vec<String> = a.model.grid.coords(j).into_iter().map(num).collect();
            row.push(num(a.model.mean_function[j]));
            row.extend(a.model.modes.iter().map(|m| num(m.values[j])));
            row
        })
        .collect();
    dir.write_csv("eigenfunctions.csv", &header, &rows)?;

    let mut header = vec!["date".to_string()];
    header.extend((1..=r).map(|i| format!("xi{i}")));
    let rows: Vec<Vec<String>> = a
        .proj
        .dates
        .iter()
        .enumerate()
        .map(|(t, d)| {
            let mut row = vec![d.to_string()];
            row.extend(a.proj.at(t).into_iter().map(num));
            row
        })
        .collect();
    dir.write_csv("projections.csv", &header, &rows)?;

    println!("{:>4}  {:>14}  {:>9}  {:>10}", "mode", "eigenvalue", "explained", "cumulative");
    for i in 0..r {
        println!(
            "{:>4}  {:>14.6e}  {:>8.4}%  {:>9.4}%",
            i + 1,
            report.eigenvalues[i],
            100.0 * report.explained[i],
            100.0 * report.cumulative[i]
        );
    }
    dir.finish("decompose", cfg)
}

// ---------------------------------------------------------------- fhs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: usize,
    pub ar_beta: Option<f64>,
    pub sign: i8,
    pub forecasts: usize,
    pub first_date: Option<String>,
    pub last_date: Option<String>,
    pub last_vol: Option<f64>,
}

pub struct FhsRun {
    pub analysis: Analysis,
    pub forecasts: Vec<ModeForecast>,
    pub scenarios: Vec<Scenario>,
}

pub fn run_forecasts(cfg: &PipelineConfig, exec: Execution) -> Result<FhsRun, CliError> {
    cfg.fhs.validate()?;
    let analysis = analyse(cfg, exec)?;
    let forecasts = forecast_modes(&analysis.proj, &cfg.fhs, exec)?;
    let scenarios = cfg
        .fhs
        .alphas
        .iter()
        .map(|&a| combine(&forecasts, a, &cfg.fhs))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FhsRun {
        analysis,
        forecasts,
        scenarios,
    })
}

fn summaries(run: &FhsRun, cfg: &PipelineConfig) -> Vec<ModeSummary> {
    run.forecasts
        .iter()
        .map(|f| ModeSummary {
            mode: f.mode + 1,
            ar_beta: f.ar.as_ref().map(|m| m.beta),
            sign: cfg.fhs.sign(f.mode),
            forecasts: f.xi_q.len(),
            first_date: f.xi_q.dates.first().map(ToString::to_string),
            last_date: f.xi_q.dates.last().map(ToString::to_string),
            last_vol: f.vol.values.last().copied(),
        })
        .collect()
}

pub fn run_fhs(cfg: &PipelineConfig, exec: Execution) -> Result<Manifest, CliError> {
    let run = run_forecasts(cfg, exec)?;
    let model = &run.analysis.model;
    let levels = cfg.fhs.levels();
    let n = run.scenarios.first().map_or(0, |s| s.dates.len());
    if n == 0 {
        return Err(CliError::Input("no date has a forecast for every mode".into()));
    }
    let qs: Vec<_> = run.forecasts.iter().map(|f| f.xi_q.tail(n)).collect();

    let mut u_ranges = Vec::with_capacity(run.scenarios.len());
    for s in &run.scenarios {
        let mut col = Vec::with_capacity(n);
        for xi in &s.xi_hat {
            let u = extreme_log_move(model, xi)?;
            let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            col.push((lo, hi));
        }
        u_ranges.push(col);
    }

    let mut header = vec!["date".to_string()];
    for f in &run.forecasts {
        header.extend(levels.iter().map(|l| format!("xi{}_q{}", f.mode + 1, l)));
    }
    for s in &run.scenarios {
        header.push(format!("u_min_a{}", s.alpha));
        header.push(format!("u_max_a{}", s.alpha));
    }
    let rows: Vec<Vec<String>> = (0..n)
        .map(|t| {
            let mut row = vec![run.scenarios[0].dates[t].to_string()];
            for q in &qs {
                row.extend(levels.iter().map(|l| num(q.level(*l).map_or(f64::NAN, |v| v[t]))));
            }
            for col in &u_ranges {
                row.push(num(col[t].0));
                row.push(num(col[t].1));
            }
            row
        })
        .collect();

    let mut dir = OutputDir::create(&cfg.out)?;
    dir.write_csv("var.csv", &header, &rows)?;

    let coord_names: Vec<String> = (0..model.grid.len())
        .map(|j| {
            model
                .grid
                .coords(j)
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join("/")
        })
        .collect();
    for s in &run.scenarios {
        let smiles = extreme_path(model, s, &run.analysis.levels, cfg.fhs.reconstruction)?;
        let mut header = vec!["date".to_string()];
        header.extend(coord_names.iter().cloned());
        let rows: Vec<Vec<String>> = s
            .dates
            .iter()
            .zip(&smiles)
            .map(|(d, v)| {
                let mut row = vec![d.to_string()];
                row.extend(v.iter().copied().map(num));
                row
            })
            .collect();
        dir.write_csv(&format!("extreme_a{}.csv", s.alpha), &header, &rows)?;
    }
    dir.write_json("fhs.json", &summaries(&run, cfg))?;

    println!("{n} forecast dates, {} to {}", run.scenarios[0].dates[0], run.scenarios[0].dates[n - 1]);
    for s in summaries(&run, cfg) {
        match s.ar_beta {
            Some(b) => println!("mode {}: AR(1) beta {b:.4}", s.mode),
            None => println!("mode {}: no AR filter", s.mode),
        }
    }
    dir.finish("fhs", cfg)
}

// ---------------------------------------------------------------- backtest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestRecord {
    pub mode: usize,
    pub tail: Tail,
    pub alpha: f64,
    #[serde(rename = "T00")]
    pub t00: u64,
    #[serde(rename = "T01")]
    pub t01: u64,
    #[serde(rename = "T10")]
    pub t10: u64,
    #[serde(rename = "T11")]
    pub t11: u64,
    pub hits: u64,
    pub observations: u64,
    pub alpha_hat: f64,
    pub pof_stat: f64,
    pub pof_pvalue: f64,
    pub ind_stat: f64,
    pub ind_pvalue: f64,
}

pub fn backtest_records(run: &FhsRun, alphas: &[f64]) -> Result<Vec<BacktestRecord>, CliError> {
    let mut out = Vec::new();
    for f in &run.forecasts {
        let realized = f.realized_residuals();
        for &alpha in alphas {
            let h = hit_sequence(&realized, &f.residual_q, alpha)?;
            let r = backtest(&h)?;
            out.push(BacktestRecord {
                mode: f.mode + 1,
                tail: r.tail,
                alpha,
                t00: r.counts.t00,
                t01: r.counts.t01,
                t10: r.counts.t10,
                t11: r.counts.t11,
                hits: r.counts.t1,
                observations: r.counts.t0 + r.counts.t1,
                alpha_hat: r.alpha_hat,
                pof_stat: r.pof.stat,
                pof_pvalue: r.pof.pvalue,
                ind_stat: r.ind.stat,
                ind_pvalue: r.ind.pvalue,
            });
        }
    }
    Ok(out)
}

pub fn run_backtest(cfg: &PipelineConfig, exec: Execution) -> Result<Manifest, CliError> {
    let run = run_forecasts(cfg, exec)?;
    let records = backtest_records(&run, &cfg.backtest_levels())?;
    let mut dir = OutputDir::create(&cfg.out)?;
    dir.write_json("backtest.json", &records)?;
    let header: Vec<String> = [
        "mode", "tail", "alpha", "T00", "T01", "T10", "T11", "alpha_hat", "pof_stat", "pof_pvalue", "ind_stat",
        "ind_pvalue",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.mode.to_string(),
                format!("{:?}", r.tail).to_lowercase(),
                num(r.alpha),
                r.t00.to_string(),
                r.t01.to_string(),
                r.t10.to_string(),
                r.t11.to_string(),
                num(r.alpha_hat),
                num(r.pof_stat),
                num(r.pof_pvalue),
                num(r.ind_stat),
                num(r.ind_pvalue),
            ]
        })
        .collect();
    dir.write_csv("backtest.csv", &header, &rows)?;
    println!(
        "{:>4}  {:>6}  {:>7}  {:>6}  {:>9}  {:>9}",
        "mode", "alpha", "hits", "rate", "POF p", "IND p"
    );
    for r in &records {
        println!(
            "{:>4}  {:>6}  {:>3}/{:<4}  {:>5.2}%  {:>9.4}  {:>9.4}",
            r.mode,
            r.alpha,
            r.hits,
            r.observations,
            100.0 * r.alpha_hat,
            r.pof_pvalue,
            r.ind_pvalue
        );
    }
    dir.finish("backtest", cfg)
}

// ---------------------------------------------------------------- check-arb

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveViolation {
    pub date: String,
    pub forward: f64,
    pub monotone_ok: bool,
    pub convex_ok: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSet {
    /// `None` for the observed smiles.
    pub alpha: Option<f64>,
    pub checked: usize,
    pub violating: usize,
    pub curves: Vec<CurveViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbitrageSummary {
    pub tol: f64,
    pub expiry: f64,
    pub tenor: f64,
    pub strike_offsets: Vec<f64>,
    /// Extreme smiles, one set per configured level.
    pub scenarios: Vec<CurveSet>,
    /// The smiles each extreme one was built from.
    pub observed: CurveSet,
}

impl ArbitrageSummary {
    pub fn violating_scenarios(&self) -> usize {
        self.scenarios.iter().map(|s| s.violating).sum()
    }
}

struct Pricing<'a> {
    moneyness: &'a [f64],
    expiry: f64,
    tol: f64,
    exec: Execution,
}

fn check_set(
    p: &Pricing<'_>,
    alpha: Option<f64>,
    dates: &[chrono::NaiveDate],
    forwards: &[f64],
    smiles: &[Vec<f64>],
) -> Result<CurveSet, CliError> {
    let moneyness = p.moneyness;
    let strikes: Vec<Vec<f64>> = forwards
        .iter()
        .map(|f| moneyness.iter().map(|m| f + m).collect())
        .collect();
    let cases: Vec<SmileCase<'_>> = (0..smiles.len())
        .map(|i| SmileCase {
            forward: forwards[i],
            strikes: &strikes[i],
            smile_moneyness: moneyness,
            smile_vols: &smiles[i],
        })
        .collect();
    let reports = check_smiles(&cases, p.expiry, p.tol, p.exec)?;
    let curves: Vec<CurveViolation> = reports
        .into_iter()
        .enumerate()
        .filter(|(_, r)| !r.is_free())
        .map(|(i, r)| CurveViolation {
            date: dates[i].to_string(),
            forward: forwards[i],
            monotone_ok: r.monotone_ok,
            convex_ok: r.convex_ok,
            violations: r.violations,
        })
        .collect();
    Ok(CurveSet {
        alpha,
        checked: smiles.len(),
        violating: curves.len(),
        curves,
    })
}

fn smile_coordinates(cfg: &PipelineConfig) -> Result<(f64, f64), CliError> {
    if cfg.slice.axis != SliceAxis::Moneyness {
        return Err(CliError::Input("check-arb needs a moneyness slice (slice.axis = moneyness)".into()));
    }
    match (cfg.slice.expiry, cfg.slice.tenor) {
        (Some(e), Some(t)) => Ok((e, t)),
        _ => Err(CliError::Input("check-arb needs slice.expiry and slice.tenor".into())),
    }
}

pub fn arbitrage_summary(run: &FhsRun, cfg: &PipelineConfig, exec: Execution) -> Result<ArbitrageSummary, CliError> {
    let (expiry, tenor) = smile_coordinates(cfg)?;
    let cube = &run.analysis.cube;
    let ei = cube.locate(Axis::Expiry, expiry)?;
    let ti = cube.locate(Axis::Tenor, tenor)?;
    let levels = &run.analysis.levels;
    let moneyness = levels.grid.axis_points()[0].to_vec();
    // the forward of the date the extreme smile is built from
    let forward_at = |pos: usize| -> Result<f64, CliError> {
        cube.forward(pos, ei, ti).or(cfg.arb.forward).ok_or_else(|| {
            CliError::Input("the cube has no forwards; set arb.forward".into())
        })
    };

    let pricing = Pricing {
        moneyness: &moneyness,
        expiry,
        tol: cfg.arb.tol,
        exec,
    };
    let mut scenarios = Vec::new();
    let mut base_positions: Vec<usize> = Vec::new();
    for s in &run.scenarios {
        let smiles = extreme_path(&run.analysis.model, s, levels, cfg.fhs.reconstruction)?;
        let positions: Vec<usize> = s
            .dates
            .iter()
            .map(|d| levels.position(*d).map(|p| p - 1))
            .collect::<Option<_>>()
            .ok_or_else(|| CliError::Numerical("scenario date missing from the slice".into()))?;
        let forwards = positions.iter().map(|&p| forward_at(p)).collect::<Result<Vec<_>, _>>()?;
        scenarios.push(check_set(&pricing, Some(s.alpha), &s.dates, &forwards, &smiles)?);
        if base_positions.is_empty() {
            base_positions = positions;
        }
    }

    let dates: Vec<_> = base_positions.iter().map(|&p| levels.dates[p]).collect();
    let forwards = base_positions.iter().map(|&p| forward_at(p)).collect::<Result<Vec<_>, _>>()?;
    let smiles: Vec<Vec<f64>> = base_positions.iter().map(|&p| levels.sample(p)).collect();
    let observed = check_set(&pricing, None, &dates, &forwards, &smiles)?;

    Ok(ArbitrageSummary {
        tol: cfg.arb.tol,
        expiry,
        tenor,
        strike_offsets: moneyness,
        scenarios,
        observed,
    })
}

/// Writes the report, then fails with [`CliError::Arbitrage`] if any extreme
/// curve is arbitrageable.
pub fn run_check_arb(cfg: &PipelineConfig, exec: Execution) -> Result<Manifest, CliError> {
    smile_coordinates(cfg)?;
    let run = run_forecasts(cfg, exec)?;
    let summary = arbitrage_summary(&run, cfg, exec)?;
    let mut dir = OutputDir::create(&cfg.out)?;
    let path = dir.write_json("arbitrage.json", &summary)?;
    for s in &summary.scenarios {
        println!(
            "alpha {}: {} of {} extreme price curves violate",
            s.alpha.unwrap_or(f64::NAN),
            s.violating,
            s.checked
        );
    }
    println!(
        "observed: {} of {} price curves violate",
        summary.observed.violating, summary.observed.checked
    );
    let manifest = dir.finish("check-arb", cfg)?;
    match summary.violating_scenarios() {
        0 => Ok(manifest),
        count => Err(CliError::Arbitrage {
            count,
            report: path.display().to_string(),
        }),
    }
}
