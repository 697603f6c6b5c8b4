//! Iterative acquisition: trace averaging, low-discrepancy schedules and the
//! posterior trace-variance heuristic for choosing the next sample times.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{default_search_box, likelihood_grid, strategy3, FitResult, Strategy3Options, LOG_FLOOR, M_B};
use crate::model::{basis_at, ModelKind};
use crate::noise::MeasurementTrace;
use crate::optim::Grid2;

/// Times closer than this are treated as the same sample.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleOrigin {
    Uniform,
    LowDiscrepancy { n0: usize, ni: usize, iteration: usize },
    TraceVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSchedule {
    pub times: Vec<f64>,
    pub origin: ScheduleOrigin,
}

impl SamplingSchedule {
    /// Largest gap in `[0, t_max]`, counting both ends of the interval.
    pub fn max_gap(&self, t_max: f64) -> f64 {
        max_gap(&self.times, t_max)
    }
}

/// Largest gap between consecutive sorted `times`, including `0` and `t_max`.
pub fn max_gap(times: &[f64], t_max: f64) -> f64 {
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut prev = 0.0;
    let mut gap: f64 = 0.0;
    for &t in sorted.iter().chain(std::iter::once(&t_max)) {
        gap = gap.max(t - prev);
        prev = t;
    }
    gap
}

/// Pointwise mean of traces sharing one schedule.
///
/// The result's `repeats` is the total number of averaged traces and its
/// noise spec is the equivalent noise of that mean.
pub fn average_traces(traces: &[MeasurementTrace]) -> Result<MeasurementTrace> {
    let first = traces.first().ok_or_else(|| Error::DegenerateInput("no traces to average".into()))?;
    if traces.iter().any(|t| t.times != first.times) {
        return Err(Error::MismatchedSchedules);
    }
    let total: u32 = traces.iter().map(|t| t.repeats).sum();
    let mut values = vec![0.0; first.len()];
    for t in traces {
        let w = t.repeats as f64 / total as f64;
        for (acc, v) in values.iter_mut().zip(&t.values) {
            *acc += w * v;
        }
    }
    Ok(MeasurementTrace {
        times: first.times.clone(),
        values,
        noise: first.noise.averaged(total / first.repeats.max(1)),
        seed: first.seed,
        repeats: total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    /// `(ω_j, γ_j)` draws; weights are uniform.
    pub params: Vec<[f64; 2]>,
}

/// Draws `j` parameter pairs from the likelihood evaluated on `grid`.
///
/// Cells are picked with probability `∝ exp(L − L_max)` and each draw is
/// jittered uniformly inside its cell.
pub fn sample_posterior<R: Rng + ?Sized>(
    trace: &MeasurementTrace,
    kind: ModelKind,
    grid: &Grid2,
    j: usize,
    rng: &mut R,
) -> Result<PosteriorSamples> {
    if j < 2 {
        return Err(Error::Domain(format!("need at least 2 posterior samples, got {j}")));
    }
    let log_l = likelihood_grid(trace, kind, grid);
    let l_max = log_l.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !l_max.is_finite() {
        return Err(Error::DegenerateLikelihood("no finite likelihood on the grid".into()));
    }
    let floor_value = 0.5 * (M_B as f64 - trace.len() as f64) * LOG_FLOOR.ln();
    if log_l.iter().all(|&v| !v.is_finite() || v >= floor_value) {
        return Err(Error::DegenerateLikelihood("every grid value is clamped".into()));
    }
    let mut cumulative = Vec::with_capacity(log_l.len());
    let mut acc = 0.0;
    for &v in &log_l {
        if v.is_finite() {
            acc += (v - l_max).exp();
        }
        cumulative.push(acc);
    }
    let (nw, ng) = grid.shape;
    let cell = grid.cell_size();
    let params = (0..j)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let idx = cumulative.partition_point(|&c| c <= u).min(nw * ng - 1);
            let (iw, ig) = (idx / ng, idx % ng);
            let centre = grid.point(iw, ig);
            [
                centre[0] + (rng.random::<f64>() - 0.5) * cell[0],
                centre[1] + (rng.random::<f64>() - 0.5) * cell[1],
            ]
        })
        .collect();
    Ok(PosteriorSamples { params })
}

/// Variance over the posterior samples of the predicted signal
/// `α₁g₁(t) + α₂g₂(t)` at each time.
pub fn prediction_variance(samples: &PosteriorSamples, kind: ModelKind, amplitudes: [f64; 2], times: &[f64]) -> Vec<f64> {
    let n = samples.params.len() as f64;
    times
        .iter()
        .map(|&t| {
            let predicted: Vec<f64> = samples
                .params
                .iter()
                .map(|p| {
                    let [g1, g2] = basis_at(kind, p[0], p[1], t);
                    amplitudes[0] * g1 + amplitudes[1] * g2
                })
                .collect();
            // shift by the first prediction so identical samples give exactly zero
            let dev: Vec<f64> = predicted.iter().map(|v| v - predicted[0]).collect();
            let mean = dev.iter().sum::<f64>() / n;
            dev.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
        })
        .collect()
}

/// Picks up to `n1` next sample times at local maxima of the prediction
/// variance, largest first.
///
/// A local maximum is an interior run of equal values higher than both
/// neighbours; its earliest time is used. With no local maximum the global
/// maximum is returned.
pub fn trace_variance_schedule(
    samples: &PosteriorSamples,
    kind: ModelKind,
    amplitudes: [f64; 2],
    candidate_times: &[f64],
    n1: usize,
) -> Result<Vec<f64>> {
    if candidate_times.is_empty() {
        return Err(Error::DegenerateInput("no candidate times".into()));
    }
    if n1 == 0 {
        return Err(Error::Domain("n1 must be >= 1".into()));
    }
    let mut times = candidate_times.to_vec();
    times.sort_by(f64::total_cmp);
    let var = prediction_variance(samples, kind, amplitudes, &times);

    let mut peaks: Vec<usize> = Vec::new();
    let mut i = 1;
    while i + 1 < var.len() {
        let mut end = i;
        while end + 1 < var.len() && var[end + 1] == var[i] {
            end += 1;
        }
        if var[i] > var[i - 1] && end + 1 < var.len() && var[i] > var[end + 1] {
            peaks.push(i);
        }
        i = end + 1;
    }
    if peaks.is_empty() {
        let best = (0..var.len()).fold(0, |b, k| if var[k] > var[b] { k } else { b });
        return Ok(vec![times[best]]);
    }
    peaks.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    Ok(peaks.into_iter().take(n1).map(|k| times[k]).collect())
}

/// Radical inverse of `n` in `base`.
pub fn van_der_corput(mut n: u64, base: u64) -> f64 {
    assert!(base >= 2, "base must be >= 2");
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut x = 0.0;
    while n > 0 {
        x += (n % base) as f64 * inv;
        n /= base;
        inv /= b;
    }
    x
}

/// Elements `from..=to` of the base-2 sequence scaled by `t_max`.
fn ld_times(from: usize, to: usize, t_max: f64) -> Vec<f64> {
    (from..=to).map(|k| t_max * van_der_corput(k as u64, 2)).collect()
}

/// Cumulative low-discrepancy schedules: the first uses elements `1..=n0`,
/// each of the `iterations` extensions appends the next `ni`.
///
/// Returns `iterations + 1` schedules with sorted times.
pub fn ld_schedule(n0: usize, ni: usize, iterations: usize, t_max: f64) -> Result<Vec<SamplingSchedule>> {
    if n0 == 0 || !(t_max > 0.0) {
        return Err(Error::Domain("need n0 >= 1 and t_max > 0".into()));
    }
    let mut out = Vec::with_capacity(iterations + 1);
    let mut times = ld_times(1, n0, t_max);
    for iteration in 0..=iterations {
        if iteration > 0 {
            let start = n0 + (iteration - 1) * ni + 1;
            times.extend(ld_times(start, start + ni - 1, t_max));
        }
        let mut sorted = times.clone();
        sorted.sort_by(f64::total_cmp);
        out.push(SamplingSchedule { times: sorted, origin: ScheduleOrigin::LowDiscrepancy { n0, ni, iteration } });
    }
    Ok(out)
}

/// Default candidate set for the variance heuristic: the first `count`
/// base-2 low-discrepancy points over `[0, t_max]`, sorted.
pub fn default_candidates(count: usize, t_max: f64) -> Vec<f64> {
    let mut c = ld_times(1, count, t_max);
    c.sort_by(f64::total_cmp);
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineMethod {
    LdSampling,
    TraceVariance,
}

impl std::str::FromStr for RefineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ld" | "ld_sampling" => Ok(RefineMethod::LdSampling),
            "variance" | "trace_variance" => Ok(RefineMethod::TraceVariance),
            _ => Err(Error::InvalidConfig(format!("unknown refinement method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOptions {
    pub t_max: f64,
    /// Samples added per iteration (an upper bound for the variance method).
    pub ni: usize,
    /// Posterior draws per iteration.
    pub posterior_samples: usize,
    pub candidates: usize,
    pub fit: Strategy3Options,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { t_max: 30.0, ni: 8, posterior_samples: 100, candidates: 256, fit: Strategy3Options::fast() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineStep {
    pub iteration: usize,
    pub n_samples: usize,
    pub fit: FitResult,
}

fn merge(trace: &MeasurementTrace, extra: &MeasurementTrace) -> Result<MeasurementTrace> {
    let mut pairs: Vec<(f64, f64)> = trace.times.iter().copied().zip(trace.values.iter().copied()).collect();
    pairs.extend(extra.times.iter().copied().zip(extra.values.iter().copied()));
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.dedup_by(|b, a| (b.0 - a.0).abs() < TIME_EPS);
    let (times, values) = pairs.into_iter().unzip();
    MeasurementTrace::new(times, values, trace.noise, trace.seed)
}

/// Alternates Strategy 3 estimation with schedule extension.
///
/// `acquire` returns measurements at the requested times. Iteration 0 fits
/// the initial schedule; each further iteration adds samples with `method`
/// and refits. `rng` drives the posterior draws of the variance method.
pub fn refine_loop<A, R>(
    initial: &SamplingSchedule,
    mut acquire: A,
    kind: ModelKind,
    method: RefineMethod,
    iterations: usize,
    opts: &RefineOptions,
    rng: &mut R,
) -> Result<Vec<RefineStep>>
where
    A: FnMut(&[f64]) -> Result<MeasurementTrace>,
    R: Rng + ?Sized,
{
    let mut trace = acquire(&initial.times)?;
    let mut ld_next = initial.times.len() + 1;
    let mut steps = Vec::with_capacity(iterations + 1);
    let grid = Grid2::new(opts.fit.search, opts.fit.grid);
    let candidates = default_candidates(opts.candidates, opts.t_max);
    for iteration in 0..=iterations {
        if iteration > 0 {
            let prev = &steps.last().map(|s: &RefineStep| s.fit).expect("iteration 0 recorded");
            let new_times = match method {
                RefineMethod::LdSampling => {
                    let t = ld_times(ld_next, ld_next + opts.ni - 1, opts.t_max);
                    ld_next += opts.ni;
                    t
                }
                RefineMethod::TraceVariance => {
                    let fresh: Vec<f64> = candidates
                        .iter()
                        .copied()
                        .filter(|c| trace.times.iter().all(|t| (t - c).abs() >= TIME_EPS))
                        .collect();
                    let samples = sample_posterior(&trace, kind, &grid, opts.posterior_samples, rng)?;
                    trace_variance_schedule(&samples, kind, prev.alpha, &fresh, opts.ni)?
                }
            };
            let mut sorted = new_times;
            sorted.sort_by(f64::total_cmp);
            trace = merge(&trace, &acquire(&sorted)?)?;
        }
        let fit = strategy3(&trace, kind, &opts.fit)?;
        steps.push(RefineStep { iteration, n_samples: trace.len(), fit });
    }
    Ok(steps)
}

/// Writes one JSON object per line.
pub fn write_json_lines<W: Write, T: Serialize>(mut w: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Search box used when no other is configured.
pub fn default_posterior_grid() -> Grid2 {
    Grid2::new(default_search_box(), (60, 40))
}
