//! Seeded measurement-noise simulation and the trace record shared by every
//! estimator.
//!
//! Random streams are ChaCha8 seeded from a 64-bit seed. Per-trace seeds are
//! derived with a SplitMix64 mix of the identifying integers, so a trace's
//! stream never depends on execution order.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ideal_signal, ModelKind, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseSpec {
    None,
    /// Additive zero-mean Gaussian noise with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Each point is the average of `ne` single-shot two-outcome measurements.
    Projection { ne: u64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::Domain(format!("gaussian sigma must be positive, got {sigma}")))
            }
            NoiseSpec::Projection { ne: 0 } => Err(Error::Domain("projection ne must be >= 1".into())),
            _ => Ok(()),
        }
    }

    /// Noise level as a single number: sigma, ne, or 0.
    pub fn level(&self) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Gaussian { sigma } => sigma,
            NoiseSpec::Projection { ne } => ne as f64,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            NoiseSpec::None => "none",
            NoiseSpec::Gaussian { .. } => "gaussian",
            NoiseSpec::Projection { .. } => "projection",
        }
    }

    /// Stable integer identity used in seed derivation.
    pub fn fingerprint(&self) -> u64 {
        match *self {
            NoiseSpec::None => 0,
            NoiseSpec::Gaussian { sigma } => mix64(1 ^ sigma.to_bits()),
            NoiseSpec::Projection { ne } => mix64(2 ^ ne.rotate_left(17)),
        }
    }

    /// Equivalent noise of the mean of `count` independent traces.
    pub fn averaged(&self, count: u32) -> NoiseSpec {
        match *self {
            NoiseSpec::None => NoiseSpec::None,
            NoiseSpec::Gaussian { sigma } => NoiseSpec::Gaussian { sigma: sigma / (count as f64).sqrt() },
            NoiseSpec::Projection { ne } => NoiseSpec::Projection { ne: ne * count as u64 },
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::None => f.write_str("none"),
            NoiseSpec::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            NoiseSpec::Projection { ne } => write!(f, "projection:{ne}"),
        }
    }
}

impl FromStr for NoiseSpec {
    type Err = Error;

    /// Parses `none`, `gaussian:<sigma>` or `projection:<ne>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse noise spec `{s}`"));
        let spec = match s.split_once(':') {
            None if s == "none" => NoiseSpec::None,
            Some(("gaussian", v)) => NoiseSpec::Gaussian { sigma: v.parse().map_err(|_| bad())? },
            Some(("projection", v)) => NoiseSpec::Projection { ne: v.parse().map_err(|_| bad())? },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A sampled, possibly noisy, measurement record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub noise: NoiseSpec,
    pub seed: u64,
    /// Number of traces averaged into this one.
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub repeats: u32,
}

fn one() -> u32 {
    1
}

fn is_one(v: &u32) -> bool {
    *v == 1
}

impl MeasurementTrace {
    /// Builds a trace from raw data, checking the schedule invariants.
    pub fn new(times: Vec<f64>, values: Vec<f64>, noise: NoiseSpec, seed: u64) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DegenerateInput(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        check_schedule(&times)?;
        Ok(Self { times, values, noise, seed, repeats: 1 })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Writes `t,d` CSV, one row per sample.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "d"])?;
        for (t, d) in self.times.iter().zip(&self.values) {
            w.write_record([t.to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `t,d` CSV. Noise metadata is not part of the CSV format and is
    /// set to [`NoiseSpec::None`] with seed 0.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            t: f64,
            d: f64,
        }
        let mut r = csv::Reader::from_reader(reader);
        let (mut times, mut values) = (Vec::new(), Vec::new());
        for row in r.deserialize() {
            let row: Row = row?;
            times.push(row.t);
            values.push(row.d);
        }
        Self::new(times, values, NoiseSpec::None, 0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let trace: Self = serde_json::from_str(s)?;
        if trace.times.len() != trace.values.len() {
            return Err(Error::DegenerateInput("times and values differ in length".into()));
        }
        check_schedule(&trace.times)?;
        Ok(trace)
    }
}

pub(crate) fn check_schedule(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::DegenerateInput("empty sampling schedule".into()));
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::Domain("sample times must be finite and non-negative".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::DegenerateInput("sample times must be strictly increasing".into()));
    }
    Ok(())
}

/// `n` uniformly spaced times `k·T/n`, `k = 0..n`.
pub fn uniform_times(n: usize, t_max: f64) -> Vec<f64> {
    let dt = t_max / n as f64;
    (0..n).map(|k| k as f64 * dt).collect()
}

/// Gaussian noise scale √(log log Nₑ / 2Nₑ) for an ensemble of `ne` systems.
pub fn gaussian_sigma_from_ensemble(ne: u64) -> Result<f64> {
    if ne < 16 {
        return Err(Error::Domain(format!("ensemble size must be >= 16, got {ne}")));
    }
    let n = ne as f64;
    Ok((n.ln().ln() / (2.0 * n)).sqrt())
}

/// Fraction of `ne` uniform draws on [0, 1] falling at or below `(1 + p)/2`.
///
/// The count is drawn from the equivalent binomial distribution.
pub fn projection_sample<R: Rng + ?Sized>(p: f64, ne: u64, rng: &mut R) -> f64 {
    let prob = (0.5 * (1.0 + p)).clamp(0.0, 1.0);
    let hits = Binomial::new(ne, prob).expect("probability clamped to [0, 1]").sample(rng);
    hits as f64 / ne as f64
}

/// Simulates one measurement trace of `params` at `times`.
///
/// Identical arguments always yield an identical trace.
pub fn simulate_trace(
    params: &SystemParams,
    kind: ModelKind,
    times: &[f64],
    noise: NoiseSpec,
    seed: u64,
) -> Result<MeasurementTrace> {
    params.validate()?;
    noise.validate()?;
    check_schedule(times)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = match noise {
        NoiseSpec::None => times.iter().map(|&t| ideal_signal(params, kind, t)).collect(),
        NoiseSpec::Gaussian { sigma } => {
            let normal = Normal::new(0.0, sigma).expect("sigma validated");
            times
                .iter()
                .map(|&t| ideal_signal(params, kind, t) + normal.sample(&mut rng))
                .collect()
        }
        NoiseSpec::Projection { ne } => times
            .iter()
            .map(|&t| 2.0 * projection_sample(ideal_signal(params, kind, t), ne, &mut rng) - 1.0)
            .collect(),
    };
    Ok(MeasurementTrace { times: times.to_vec(), values, noise, seed, repeats: 1 })
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a master seed and identifying parts.
pub fn stream_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix64(master), |acc, &p| mix64(acc ^ mix64(p)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_models;

    fn model1() -> SystemParams {
        builtin_models().model(1).unwrap()
    }

    #[test]
    fn ensemble_sigma_values() {
        // direct evaluation of sqrt(ln ln N / 2N)
        assert!((gaussian_sigma_from_ensemble(16).unwrap() - 0.178_516_581_9).abs() < 1e-9);
        assert!((gaussian_sigma_from_ensemble(10_000).unwrap() - 0.010_536_429_2).abs() < 1e-9);
        assert!(matches!(gaussian_sigma_from_ensemble(15), Err(Error::Domain(_))));
        let seq: Vec<f64> = [16u64, 17, 100, 1000, 10_000, 1_000_000]
            .iter()
            .map(|&n| gaussian_sigma_from_ensemble(n).unwrap())
            .collect();
        assert!(seq.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn noiseless_trace_is_ideal() {
        let times: Vec<f64> = (0..100).map(|k| 0.3 * k as f64).collect();
        let tr = simulate_trace(&model1(), ModelKind::DephasingFid, &times, NoiseSpec::None, 3).unwrap();
        for (t, d) in tr.times.iter().zip(&tr.values) {
            assert_eq!(*d, ideal_signal(&model1(), ModelKind::DephasingFid, *t));
        }
    }

    #[test]
    fn projection_extremes_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for ne in [1, 7, 1000] {
            assert_eq!(projection_sample(-1.0, ne, &mut rng), 0.0);
            assert_eq!(projection_sample(1.0, ne, &mut rng), 1.0);
        }
        // p(0) = 1 for model 1 with pi/2 angles
        let tr = simulate_trace(&model1(), ModelKind::DephasingFid, &[0.0, 1.0], NoiseSpec::Projection { ne: 50 }, 4)
            .unwrap();
        assert_eq!(tr.values[0], 1.0);
    }

    #[test]
    fn projection_half_concentrates() {
        let ne = 100_000;
        let close = (0..200u64)
            .filter(|&s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                (projection_sample(0.0, ne, &mut rng) - 0.5).abs() < 0.01
            })
            .count();
        assert!(close >= 198);
    }

    #[test]
    fn projection_large_ensemble_tracks_signal() {
        let times = uniform_times(100, 30.0);
        for seed in 0..100 {
            let tr = simulate_trace(
                &model1(),
                ModelKind::DephasingFid,
                &times,
                NoiseSpec::Projection { ne: 1_000_000 },
                seed,
            )
            .unwrap();
            let worst = tr
                .times
                .iter()
                .zip(&tr.values)
                .map(|(t, d)| (d - ideal_signal(&model1(), ModelKind::DephasingFid, *t)).abs())
                .fold(0.0, f64::max);
            assert!(worst < 0.01, "seed {seed}: {worst}");
        }
    }

    #[test]
    fn projection_values_on_lattice() {
        let ne = 37;
        let tr = simulate_trace(
            &model1(),
            ModelKind::DephasingFid,
            &uniform_times(60, 30.0),
            NoiseSpec::Projection { ne },
            11,
        )
        .unwrap();
        for d in &tr.values {
            let k = (d + 1.0) / 2.0 * ne as f64;
            assert!((k - k.round()).abs() < 1e-9);
            assert!((-1.0..=1.0).contains(d));
        }
    }

    #[test]
    fn projection_residual_variance() {
        let ne = 200;
        let times = uniform_times(100, 30.0);
        let p = model1();
        let (mut sum_sq, mut expected, mut count) = (0.0, 0.0, 0.0);
        for seed in 0..400 {
            let tr = simulate_trace(&p, ModelKind::DephasingFid, &times, NoiseSpec::Projection { ne }, seed).unwrap();
            for (t, d) in tr.times.iter().zip(&tr.values) {
                let ideal = ideal_signal(&p, ModelKind::DephasingFid, *t);
                sum_sq += (d - ideal).powi(2);
                expected += (1.0 - ideal * ideal) / ne as f64;
                count += 1.0;
            }
        }
        let (emp, theo) = (sum_sq / count, expected / count);
        assert!((emp / theo - 1.0).abs() < 0.02, "{emp} vs {theo}");
        assert!(theo <= 1.0 / ne as f64);
    }

    #[test]
    fn gaussian_moments() {
        let sigma = 0.05;
        let n = 100_000;
        let times = uniform_times(n, 1.0);
        let flat = SystemParams::new(1.0, 0.0).with_angles(0.0, std::f64::consts::FRAC_PI_2);
        let tr = simulate_trace(&flat, ModelKind::DephasingFid, &times, NoiseSpec::Gaussian { sigma }, 21).unwrap();
        let mean = tr.values.iter().sum::<f64>() / n as f64;
        let var = tr.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se_mean = sigma / (n as f64).sqrt();
        let se_var = sigma * sigma * (2.0 / (n - 1) as f64).sqrt();
        assert!(mean.abs() < 3.0 * se_mean);
        assert!((var - sigma * sigma).abs() < 3.0 * se_var);
    }

    #[test]
    fn same_seed_same_trace() {
        let times = uniform_times(100, 30.0);
        for noise in [NoiseSpec::Gaussian { sigma: 0.05 }, NoiseSpec::Projection { ne: 100 }] {
            let a = simulate_trace(&model1(), ModelKind::DrivenRabi, &times, noise, 77).unwrap();
            let b = simulate_trace(&model1(), ModelKind::DrivenRabi, &times, noise, 77).unwrap();
            let c = simulate_trace(&model1(), ModelKind::DrivenRabi, &times, noise, 78).unwrap();
            assert_eq!(a, b);
            assert_ne!(a.values, c.values);
        }
    }

    #[test]
    fn rejects_bad_schedules() {
        let p = model1();
        assert!(simulate_trace(&p, ModelKind::DephasingFid, &[], NoiseSpec::None, 0).is_err());
        assert!(simulate_trace(&p, ModelKind::DephasingFid, &[1.0, 1.0], NoiseSpec::None, 0).is_err());
        assert!(simulate_trace(&p, ModelKind::DephasingFid, &[0.0], NoiseSpec::Gaussian { sigma: 0.0 }, 0).is_err());
    }

    #[test]
    fn csv_and_json_formats() {
        let tr = simulate_trace(
            &model1(),
            ModelKind::DephasingFid,
            &[0.0, 0.3, 0.6],
            NoiseSpec::Gaussian { sigma: 0.05 },
            5,
        )
        .unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,d\n0,"));
        assert_eq!(text.lines().count(), 4);
        let back = MeasurementTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values, tr.values);
        assert_eq!(back.times, tr.times);

        let json = tr.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["noise"]["kind"], "gaussian");
        assert_eq!(v["seed"], 5);
        assert!(v.get("repeats").is_none());
        assert_eq!(MeasurementTrace::from_json(&json).unwrap(), tr);
    }

    #[test]
    fn noise_spec_parsing() {
        assert_eq!("none".parse::<NoiseSpec>().unwrap(), NoiseSpec::None);
        assert_eq!("gaussian:0.05".parse::<NoiseSpec>().unwrap(), NoiseSpec::Gaussian { sigma: 0.05 });
        assert_eq!("projection:100".parse::<NoiseSpec>().unwrap(), NoiseSpec::Projection { ne: 100 });
        assert!("projection:0".parse::<NoiseSpec>().is_err());
        assert!("poisson:3".parse::<NoiseSpec>().is_err());
    }

    #[test]
    fn stream_seeds_differ() {
        let a = stream_seed(1, &[0, 0, 0]);
        let b = stream_seed(1, &[0, 0, 1]);
        let c = stream_seed(2, &[0, 0, 0]);
        assert!(a != b && a != c && b != c);
        assert_eq!(a, stream_seed(1, &[0, 0, 0]));
    }
}
