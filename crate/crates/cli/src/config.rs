//! Flat `key = value` pipeline configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use volrisk::fhs::{FhsConfig, Reconstruction};
use volrisk::volgrid::{Axis, FieldGrid, SliceAxis, SliceSpec};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub dates: usize,
    pub lambdas: Vec<f64>,
    pub betas: Vec<f64>,
    pub vol_cluster: f64,
    pub grid: String,
    pub forward: f64,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            dates: 2500,
            lambdas: vec![9e-7, 9e-8, 1e-8],
            betas: vec![0.18],
            vol_cluster: 0.98,
            grid: "-0.02:0.02:17".into(),
            forward: 0.025,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArbSettings {
    pub tol: f64,
    /// Used when the cube carries no forwards.
    pub forward: Option<f64>,
}

impl Default for ArbSettings {
    fn default() -> Self {
        Self {
            tol: volrisk::bachelier::DEFAULT_ARB_TOL,
            forward: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub slice: SliceSpec,
    /// Legendre functions per axis; `None` means `min(8, points)`.
    pub basis_degree: Option<usize>,
    pub modes: usize,
    pub fhs: FhsConfig,
    pub backtest_alphas: Option<Vec<f64>>,
    pub seed: u64,
    pub synth: SynthSettings,
    pub arb: ArbSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            out: PathBuf::from("out"),
            slice: SliceSpec::smile(5.0, 10.0),
            basis_degree: None,
            modes: 3,
            fhs: FhsConfig::default(),
            backtest_alphas: None,
            seed: 1,
            synth: SynthSettings::default(),
            arb: ArbSettings::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("invalid value '{value}' for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value.split(',').map(|v| parse(key, v)).collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value.trim() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(CliError::Input(format!("invalid value '{value}' for {key}"))),
    }
}

/// 1-based mode index from keys like `fhs.use_ar.mode_2`.
fn mode_index(key: &str, prefix: &str) -> Result<usize, CliError> {
    let n: usize = parse(key, &key[prefix.len()..])?;
    if n == 0 {
        return Err(CliError::Input(format!("{key}: modes are numbered from 1")));
    }
    Ok(n - 1)
}

fn set_at<T: Clone>(v: &mut Vec<T>, i: usize, value: T, fill: T) {
    if v.len() <= i {
        v.resize(i + 1, fill);
    }
    v[i] = value;
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn slice_axis_name(axis: SliceAxis) -> &'static str {
    match axis {
        SliceAxis::Moneyness => "moneyness",
        SliceAxis::Expiry => "expiry",
        SliceAxis::Tenor => "tenor",
        SliceAxis::ExpiryTenor => "expiry-tenor",
    }
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "input" => self.input = Some(PathBuf::from(v)),
            "out" => self.out = PathBuf::from(v),
            "slice.axis" => {
                self.slice.axis = match v {
                    "moneyness" => SliceAxis::Moneyness,
                    "expiry" => SliceAxis::Expiry,
                    "tenor" => SliceAxis::Tenor,
                    "expiry-tenor" => SliceAxis::ExpiryTenor,
                    _ => return Err(CliError::Input(format!("unknown slice axis '{v}'"))),
                }
            }
            "slice.moneyness" => self.slice.moneyness = Some(parse(key, v)?),
            "slice.expiry" => self.slice.expiry = Some(parse(key, v)?),
            "slice.tenor" => self.slice.tenor = Some(parse(key, v)?),
            "basis.degree" => self.basis_degree = Some(parse(key, v)?),
            "modes" => self.modes = parse(key, v)?,
            "fhs.L" => self.fhs.window = parse(key, v)?,
            "fhs.theta" => self.fhs.ewma.theta = parse(key, v)?,
            "fhs.W" => self.fhs.ewma.window = parse(key, v)?,
            "fhs.alphas" => self.fhs.alphas = parse_list(key, v)?,
            "fhs.reconstruction" => {
                self.fhs.reconstruction =
                    Reconstruction::from_str(v).map_err(|e| CliError::Input(e.to_string()))?
            }
            k if k.starts_with("fhs.use_ar.mode_") => {
                let i = mode_index(k, "fhs.use_ar.mode_")?;
                set_at(&mut self.fhs.use_ar, i, parse_bool(k, v)?, false);
            }
            k if k.starts_with("fhs.signs.mode_") => {
                let i = mode_index(k, "fhs.signs.mode_")?;
                let s: i8 = parse(k, v.trim_start_matches('+'))?;
                set_at(&mut self.fhs.signs, i, s, 1);
            }
            "backtest.alphas" => self.backtest_alphas = Some(parse_list(key, v)?),
            "seed" => self.seed = parse(key, v)?,
            "synth.dates" => self.synth.dates = parse(key, v)?,
            "synth.lambdas" => self.synth.lambdas = parse_list(key, v)?,
            "synth.beta" => self.synth.betas = parse_list(key, v)?,
            "synth.vol_cluster" => self.synth.vol_cluster = parse(key, v)?,
            "synth.grid" => self.synth.grid = v.to_string(),
            "synth.forward" => self.synth.forward = parse(key, v)?,
            "arb.tol" => self.arb.tol = parse(key, v)?,
            "arb.forward" => self.arb.forward = Some(parse(key, v)?),
            _ => return Err(CliError::Input(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Applies `key=value`.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), CliError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("expected KEY=VALUE, got '{assignment}'")))?;
        self.set(k.trim(), v)
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn parse_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.apply_override(line)
                .map_err(|e| CliError::Input(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.parse_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    pub fn backtest_levels(&self) -> Vec<f64> {
        self.backtest_alphas.clone().unwrap_or_else(|| self.fhs.alphas.clone())
    }

    /// Every setting as `key → value`, in a form [`PipelineConfig::set`] reads back.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        if let Some(p) = &self.input {
            put("input", p.display().to_string());
        }
        put("out", self.out.display().to_string());
        put("slice.axis", slice_axis_name(self.slice.axis).into());
        for (k, v) in [
            ("slice.moneyness", self.slice.moneyness),
            ("slice.expiry", self.slice.expiry),
            ("slice.tenor", self.slice.tenor),
        ] {
            if let Some(v) = v {
                put(k, v.to_string());
            }
        }
        if let Some(d) = self.basis_degree {
            put("basis.degree", d.to_string());
        }
        put("modes", self.modes.to_string());
        put("fhs.L", self.fhs.window.to_string());
        put("fhs.theta", self.fhs.ewma.theta.to_string());
        put("fhs.W", self.fhs.ewma.window.to_string());
        put("fhs.alphas", join(&self.fhs.alphas));
        put(
            "fhs.reconstruction",
            match self.fhs.reconstruction {
                Reconstruction::Multiplicative => "multiplicative",
                Reconstruction::Additive => "additive-paper",
            }
            .into(),
        );
        for i in 0..self.modes {
            put(&format!("fhs.use_ar.mode_{}", i + 1), self.fhs.ar_enabled(i).to_string());
            put(&format!("fhs.signs.mode_{}", i + 1), self.fhs.sign(i).to_string());
        }
        if let Some(a) = &self.backtest_alphas {
            put("backtest.alphas", join(a));
        }
        put("seed", self.seed.to_string());
        put("synth.dates", self.synth.dates.to_string());
        put("synth.lambdas", join(&self.synth.lambdas));
        put("synth.beta", join(&self.synth.betas));
        put("synth.vol_cluster", self.synth.vol_cluster.to_string());
        put("synth.grid", self.synth.grid.clone());
        put("synth.forward", self.synth.forward.to_string());
        put("arb.tol", self.arb.tol.to_string());
        if let Some(f) = self.arb.forward {
            put("arb.forward", f.to_string());
        }
        m
    }
}

fn parse_axis_range(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Input(format!("grid axis '{spec}' is not a:b:n"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n < 2 || !(b > a) {
        return Err(CliError::Input(format!("grid axis '{spec}' needs a < b and n ≥ 2")));
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

/// `a:b:n` is a moneyness line; `a:b:n,c:d:m` an expiry × tenor lattice.
pub fn parse_grid(spec: &str) -> Result<FieldGrid, CliError> {
    let axes: Vec<&str> = spec.split(',').collect();
    match axes.as_slice() {
        [m] => Ok(FieldGrid::line(Axis::Moneyness, parse_axis_range(m)?)),
        [e, t] => Ok(FieldGrid::lattice(
            [Axis::Expiry, Axis::Tenor],
            parse_axis_range(e)?,
            parse_axis_range(t)?,
        )),
        _ => Err(CliError::Input(format!("grid '{spec}' must have one or two axes"))),
    }
}
