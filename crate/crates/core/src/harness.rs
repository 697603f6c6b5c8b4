//! Monte-Carlo comparison of the three estimators.
//!
//! A cell is one `(model, noise)` pair; every run in a cell simulates one
//! trace and hands it to each configured strategy. Trace seeds depend only on
//! the master seed, the model index, the noise spec and the run index, so
//! results do not depend on sweep order or thread scheduling.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::ld_schedule;
use crate::error::{Error, Result};
use crate::fisher::{crb_gap, fisher_matrix, CrbGap};
use crate::likelihood::{strategy3, FitResult, Strategy3Options};
use crate::model::{builtin_models, ModelKind, SystemParams};
use crate::noise::{simulate_trace, stream_seed, uniform_times, MeasurementTrace, NoiseSpec};
use crate::spectral::{strategy1, strategy2, trace_peak};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Strategy {
    /// Fourier peak position and height.
    PeakHeight,
    /// Fourier peak position and width.
    PeakWidth,
    /// Marginal likelihood maximum.
    Likelihood,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::PeakHeight, Strategy::PeakWidth, Strategy::Likelihood];

    pub fn number(self) -> u8 {
        match self {
            Strategy::PeakHeight => 1,
            Strategy::PeakWidth => 2,
            Strategy::Likelihood => 3,
        }
    }
}

impl TryFrom<u8> for Strategy {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Strategy::PeakHeight),
            2 => Ok(Strategy::PeakWidth),
            3 => Ok(Strategy::Likelihood),
            _ => Err(Error::InvalidConfig(format!("strategy must be 1, 2 or 3, got {v}"))),
        }
    }
}

impl From<Strategy> for u8 {
    fn from(s: Strategy) -> u8 {
        s.number()
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .parse::<u8>()
            .map_err(|_| Error::InvalidConfig(format!("strategy must be 1, 2 or 3, got `{s}`")))?
            .try_into()
    }
}

/// Runs one estimator on a trace.
///
/// The Fourier strategies only fill in `omega` and `gamma`.
pub fn estimate(trace: &MeasurementTrace, kind: ModelKind, strategy: Strategy, s3: &Strategy3Options) -> Result<FitResult> {
    match strategy {
        Strategy::PeakHeight => {
            let e = strategy1(&trace_peak(trace)?)?;
            Ok(FitResult::point(e.omega, e.gamma))
        }
        Strategy::PeakWidth => {
            let e = strategy2(&trace_peak(trace)?)?;
            Ok(FitResult::point(e.omega, e.gamma))
        }
        Strategy::Likelihood => strategy3(trace, kind, s3),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleConfig {
    /// `n` points `k·t_max/n`.
    Uniform { n: usize, t_max: f64 },
    /// The final cumulative low-discrepancy schedule.
    Ld { n0: usize, ni: usize, iterations: usize, t_max: f64 },
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig::Uniform { n: 100, t_max: 30.0 }
    }
}

impl ScheduleConfig {
    pub fn times(&self) -> Result<Vec<f64>> {
        match *self {
            ScheduleConfig::Uniform { n, t_max } => {
                if n < 2 || !(t_max > 0.0) {
                    return Err(Error::InvalidConfig("uniform schedule needs n >= 2 and t_max > 0".into()));
                }
                Ok(uniform_times(n, t_max))
            }
            ScheduleConfig::Ld { n0, ni, iterations, t_max } => {
                Ok(ld_schedule(n0, ni, iterations, t_max)?.pop().expect("at least one schedule").times)
            }
        }
    }
}

fn default_models() -> Vec<SystemParams> {
    builtin_models().iter().collect()
}

fn default_noise_sweep() -> Vec<NoiseSpec> {
    [0.01, 0.02, 0.04, 0.06, 0.08, 0.10].map(|sigma| NoiseSpec::Gaussian { sigma }).to_vec()
}

/// Projection-noise ensemble sizes swept by default.
pub const PROJECTION_SWEEP: [u64; 5] = [100, 500, 1000, 5000, 10_000];

fn default_strategies() -> Vec<Strategy> {
    Strategy::ALL.to_vec()
}

fn default_runs() -> usize {
    100
}

fn default_kind() -> ModelKind {
    ModelKind::DephasingFid
}

/// A comparison sweep. Missing JSON fields take the defaults: the ten
/// built-in models, fid, uniform 100 points over 30, the Gaussian sweep,
/// all strategies, 100 runs, seed 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_models")]
    pub models: Vec<SystemParams>,
    #[serde(default = "default_kind")]
    pub kind: ModelKind,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default = "default_noise_sweep")]
    pub noise_sweep: Vec<NoiseSpec>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<Strategy>,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            models: default_models(),
            kind: default_kind(),
            schedule: ScheduleConfig::default(),
            noise_sweep: default_noise_sweep(),
            strategies: default_strategies(),
            runs: default_runs(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be >= 1".into()));
        }
        if self.models.is_empty() || self.noise_sweep.is_empty() || self.strategies.is_empty() {
            return Err(Error::InvalidConfig("models, noise_sweep and strategies must be nonempty".into()));
        }
        for m in &self.models {
            m.validate()?;
        }
        for n in &self.noise_sweep {
            n.validate()?;
        }
        self.schedule.times()?;
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Seed of run `run` for the model with 1-based index `model_idx` under `noise`.
pub fn run_seed(master: u64, model_idx: usize, noise: &NoiseSpec, run: usize) -> u64 {
    stream_seed(master, &[model_idx as u64, noise.fingerprint(), run as u64])
}

/// Per-run outcomes of one strategy in one cell; failures are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRuns {
    pub model_idx: usize,
    pub truth: SystemParams,
    pub noise: NoiseSpec,
    pub strategy: Strategy,
    pub fits: Vec<Option<FitResult>>,
}

impl CellRuns {
    /// Successful `(ω̂, γ̂)` estimates.
    pub fn estimates(&self) -> Vec<[f64; 2]> {
        self.fits.iter().flatten().map(|f| [f.omega, f.gamma]).collect()
    }

    pub fn n_failed(&self) -> usize {
        self.fits.iter().filter(|f| f.is_none()).count()
    }

    /// Relative errors `|ω̂ − ω|/ω` and `|γ̂ − γ|/γ` of the successful runs.
    pub fn relative_errors(&self) -> Vec<[f64; 2]> {
        self.estimates()
            .iter()
            .map(|e| [(e[0] - self.truth.omega).abs() / self.truth.omega, (e[1] - self.truth.gamma).abs() / self.truth.gamma])
            .collect()
    }

    pub fn record(&self) -> ErrorRecord {
        let est = self.estimates();
        let n = est.len() as f64;
        let errs = self.relative_errors();
        let mean_of = |v: &mut dyn Iterator<Item = f64>| if n > 0.0 { v.sum::<f64>() / n } else { f64::NAN };
        ErrorRecord {
            model_idx: self.model_idx,
            omega_true: self.truth.omega,
            gamma_true: self.truth.gamma,
            noise_kind: self.noise.kind_name().to_string(),
            noise_level: self.noise.level(),
            strategy: self.strategy,
            e_omega: mean_of(&mut errs.iter().map(|e| e[0])),
            e_gamma: mean_of(&mut errs.iter().map(|e| e[1])),
            bias_omega: mean_of(&mut est.iter().map(|e| e[0] - self.truth.omega)),
            bias_gamma: mean_of(&mut est.iter().map(|e| e[1] - self.truth.gamma)),
            n_failed: self.n_failed(),
        }
    }
}

/// Simulates `runs` traces for one cell and applies every strategy to each.
///
/// `model_idx` is 1-based and only feeds the seed derivation.
pub fn run_cell(
    cfg: &ExperimentConfig,
    model_idx: usize,
    truth: &SystemParams,
    noise: &NoiseSpec,
    s3: &Strategy3Options,
) -> Result<Vec<CellRuns>> {
    let times = cfg.schedule.times()?;
    let per_run: Vec<Vec<Option<FitResult>>> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let seed = run_seed(cfg.seed, model_idx, noise, run);
            match simulate_trace(truth, cfg.kind, &times, *noise, seed) {
                Ok(trace) => cfg.strategies.iter().map(|&s| estimate(&trace, cfg.kind, s, s3).ok()).collect(),
                Err(_) => vec![None; cfg.strategies.len()],
            }
        })
        .collect();
    Ok(cfg
        .strategies
        .iter()
        .enumerate()
        .map(|(k, &strategy)| CellRuns {
            model_idx,
            truth: *truth,
            noise: *noise,
            strategy,
            fits: per_run.iter().map(|r| r[k]).collect(),
        })
        .collect())
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub model_idx: usize,
    pub omega_true: f64,
    pub gamma_true: f64,
    pub noise_kind: String,
    pub noise_level: f64,
    pub strategy: Strategy,
    pub e_omega: f64,
    pub e_gamma: f64,
    pub bias_omega: f64,
    pub bias_gamma: f64,
    pub n_failed: usize,
}

/// Spread of one error metric across models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Spread {
    /// Min, median and max of the finite values; `None` if there are none.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(Spread { min: v[0], median: median_sorted(&v), max: v[v.len() - 1] })
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median of the finite values, NaN if there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    Spread::of(values).map_or(f64::NAN, |s| s.median)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub noise_kind: String,
    pub noise_level: f64,
    pub strategy: Strategy,
    pub e_omega: Spread,
    pub e_gamma: Spread,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ErrorStats {
    pub records: Vec<ErrorRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::InvalidConfig(format!("unknown output format `{s}`"))),
        }
    }
}

impl ErrorStats {
    /// Rows for one noise setting and strategy.
    pub fn select<'a>(&'a self, noise: &'a NoiseSpec, strategy: Strategy) -> impl Iterator<Item = &'a ErrorRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.strategy == strategy && r.noise_kind == noise.kind_name() && r.noise_level == noise.level())
    }

    /// Min/median/max across models of the mean relative errors, per noise
    /// setting and strategy, in first-appearance order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(String, f64, Strategy)> = Vec::new();
        for r in &self.records {
            let k = (r.noise_kind.clone(), r.noise_level, r.strategy);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .filter_map(|(kind, level, strategy)| {
                let rows: Vec<&ErrorRecord> = self
                    .records
                    .iter()
                    .filter(|r| r.noise_kind == kind && r.noise_level == level && r.strategy == strategy)
                    .collect();
                Some(SummaryRow {
                    e_omega: Spread::of(rows.iter().map(|r| r.e_omega))?,
                    e_gamma: Spread::of(rows.iter().map(|r| r.e_gamma))?,
                    noise_kind: kind,
                    noise_level: level,
                    strategy,
                })
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        wr.write_record([
            "model_idx",
            "omega_true",
            "gamma_true",
            "noise_kind",
            "noise_level",
            "strategy",
            "e_omega",
            "e_gamma",
            "bias_omega",
            "bias_gamma",
            "n_failed",
        ])?;
        for r in &self.records {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let records = rd.deserialize().collect::<std::result::Result<Vec<ErrorRecord>, _>>()?;
        Ok(Self { records })
    }

    /// JSON array of records; non-finite numbers become `null`.
    pub fn to_json(&self) -> Result<String> {
        let value: Vec<serde_json::Value> = self
            .records
            .iter()
            .map(|r| {
                serde_json::json!({
                    "model_idx": r.model_idx,
                    "omega_true": r.omega_true,
                    "gamma_true": r.gamma_true,
                    "noise_kind": r.noise_kind,
                    "noise_level": r.noise_level,
                    "strategy": r.strategy,
                    "e_omega": r.e_omega,
                    "e_gamma": r.e_gamma,
                    "bias_omega": r.bias_omega,
                    "bias_gamma": r.bias_gamma,
                    "n_failed": r.n_failed,
                })
            })
            .collect();
        Ok(serde_json::to_string_pretty(&value)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: Vec<serde_json::Value> = serde_json::from_str(s)?;
        let records = raw
            .into_iter()
            .map(|v| {
                let nan = |v: &serde_json::Value| v.as_f64().unwrap_or(f64::NAN);
                Ok(ErrorRecord {
                    model_idx: serde_json::from_value(v["model_idx"].clone())?,
                    omega_true: serde_json::from_value(v["omega_true"].clone())?,
                    gamma_true: serde_json::from_value(v["gamma_true"].clone())?,
                    noise_kind: serde_json::from_value(v["noise_kind"].clone())?,
                    noise_level: serde_json::from_value(v["noise_level"].clone())?,
                    strategy: serde_json::from_value(v["strategy"].clone())?,
                    e_omega: nan(&v["e_omega"]),
                    e_gamma: nan(&v["e_gamma"]),
                    bias_omega: nan(&v["bias_omega"]),
                    bias_gamma: nan(&v["bias_gamma"]),
                    n_failed: serde_json::from_value(v["n_failed"].clone())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { records })
    }

    pub fn emit(&self, path: &Path, format: OutputFormat) -> Result<()> {
        let file = std::fs::File::create(path)?;
        match format {
            OutputFormat::Csv => self.write_csv(std::io::BufWriter::new(file)),
            OutputFormat::Json => {
                let mut w = std::io::BufWriter::new(file);
                w.write_all(self.to_json()?.as_bytes())?;
                w.write_all(b"\n")?;
                Ok(w.flush()?)
            }
        }
    }

    pub fn parse(path: &Path, format: OutputFormat) -> Result<Self> {
        match format {
            OutputFormat::Csv => Self::read_csv(std::fs::File::open(path)?),
            OutputFormat::Json => Self::from_json(&std::fs::read_to_string(path)?),
        }
    }
}

/// Runs the whole sweep. Strategy failures are counted per cell, never fatal.
///
/// Strategy 3 runs without uncertainty estimation here.
pub fn run_comparison(cfg: &ExperimentConfig) -> Result<ErrorStats> {
    cfg.validate()?;
    let s3 = Strategy3Options::fast();
    let mut records = Vec::new();
    for (i, truth) in cfg.models.iter().enumerate() {
        for noise in &cfg.noise_sweep {
            for cell in run_cell(cfg, i + 1, truth, noise, &s3)? {
                records.push(cell.record());
            }
        }
    }
    Ok(ErrorStats { records })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub n: usize,
}

impl Histogram {
    /// Fixed-width bins over the range of `values`.
    pub fn of(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() || bins == 0 {
            return Err(Error::DegenerateInput("histogram needs values and at least one bin".into()));
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0; bins];
        let width = (hi - lo) / bins as f64;
        for &v in values {
            let k = if width > 0.0 { (((v - lo) / width) as usize).min(bins - 1) } else { 0 };
            counts[k] += 1;
        }
        Ok(Histogram { lo, hi, counts, mean, std: var.sqrt(), n })
    }

    /// Standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        self.std / (self.n as f64).sqrt()
    }

    /// `|mean − truth| < k·SE`.
    pub fn consistent_with(&self, truth: f64, k: f64) -> bool {
        (self.mean - truth).abs() < k * self.standard_error()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasHistogram {
    pub strategy: Strategy,
    pub omega: Histogram,
    pub gamma: Histogram,
    pub n_failed: usize,
}

/// Histograms of the estimates of each configured strategy for one cell.
pub fn bias_histogram(
    cfg: &ExperimentConfig,
    model_idx: usize,
    noise: &NoiseSpec,
    bins: usize,
) -> Result<Vec<BiasHistogram>> {
    if cfg.runs < 100 {
        return Err(Error::InvalidConfig("bias histograms need at least 100 runs".into()));
    }
    let truth = cfg
        .models
        .get(model_idx.wrapping_sub(1))
        .ok_or_else(|| Error::InvalidConfig(format!("no model {model_idx}")))?;
    run_cell(cfg, model_idx, truth, noise, &Strategy3Options::fast())?
        .into_iter()
        .map(|cell| {
            let est = cell.estimates();
            let w: Vec<f64> = est.iter().map(|e| e[0]).collect();
            let g: Vec<f64> = est.iter().map(|e| e[1]).collect();
            Ok(BiasHistogram {
                strategy: cell.strategy,
                omega: Histogram::of(&w, bins)?,
                gamma: Histogram::of(&g, bins)?,
                n_failed: cell.n_failed(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbRow {
    pub ne: u64,
    /// Noise scale `Ne^{-1/2}` used for the Fisher matrix.
    pub sigma: f64,
    pub n_failed: usize,
    pub gap: CrbGap,
}

/// Strategy 3 under projection noise for each `Ne`, compared with the
/// Cramér–Rao bound at `σ = Ne^{-1/2}`.
pub fn crb_sweep(truth: &SystemParams, ne_list: &[u64], runs: usize, seed: u64) -> Result<Vec<CrbRow>> {
    let cfg = ExperimentConfig {
        models: vec![*truth],
        kind: ModelKind::DephasingFid,
        schedule: ScheduleConfig::default(),
        noise_sweep: ne_list.iter().map(|&ne| NoiseSpec::Projection { ne }).collect(),
        strategies: vec![Strategy::Likelihood],
        runs,
        seed,
    };
    cfg.validate()?;
    let times = cfg.schedule.times()?;
    ne_list
        .iter()
        .map(|&ne| {
            let noise = NoiseSpec::Projection { ne };
            let cell = run_cell(&cfg, 1, truth, &noise, &Strategy3Options::fast())?.remove(0);
            let sigma = (ne as f64).sqrt().recip();
            let gap = crb_gap(&cell.estimates(), &fisher_matrix(truth, &times, sigma)?)?;
            Ok(CrbRow { ne, sigma, n_failed: cell.n_failed(), gap })
        })
        .collect()
}
