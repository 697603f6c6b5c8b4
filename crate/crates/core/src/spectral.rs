//! Fourier spectra of measurement traces and the two peak-based estimators.
//!
//! Both estimators start from a [`PeakInfo`]: the peak position `ω*`, the peak
//! power `P*` and the half-width `d` at half maximum of `|F|`. For a unit
//! amplitude signal `e^{-γt}cos(ω₀t)` on `t ≥ 0` these satisfy
//!
//! ```text
//! ω*² = ω₀√(4γ² + ω₀²) − γ²
//! P*  = (ω₀² + ω*² + γ²) / (8γ²ω₀²)
//! d   = √(ω*² + 2√3·γ·√(ω*² + γ²)) − ω*
//! ```
//!
//! The height-based estimator inverts the first two relations numerically,
//! the width-based one inverts the first and third in closed form.

use std::f64::consts::PI;
use std::io::Write;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::MeasurementTrace;
use crate::optim::{nelder_mead, Bounds2, NelderMeadOptions};

/// Number of points in the default angular-frequency grid.
pub const DEFAULT_GRID_POINTS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumKind {
    DiscreteFft,
    ContinuousTrapezoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Angular frequencies, strictly increasing.
    pub freqs: Vec<f64>,
    pub values: Vec<Complex64>,
    pub kind: SpectrumKind,
}

impl Spectrum {
    pub fn power(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|v| v.norm_sqr())
    }

    /// Writes `omega,re,im,power` CSV.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["omega", "re", "im", "power"])?;
        for (omega, v) in self.freqs.iter().zip(&self.values) {
            w.write_record([omega.to_string(), v.re.to_string(), v.im.to_string(), v.norm_sqr().to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakInfo {
    pub omega_star: f64,
    pub p_star: f64,
    /// Half-width at half maximum of `|F|`.
    pub d: f64,
}

impl PeakInfo {
    /// True when the peak is at least as wide as its distance from zero.
    pub fn is_wide(&self) -> bool {
        self.d >= self.omega_star
    }
}

/// `(d - mean) / max|d - mean|`.
pub fn center_rescale(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::DegenerateInput("empty trace".into()));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let scale = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::DegenerateInput("all trace values are equal".into()));
    }
    Ok(values.iter().map(|v| (v - mean) / scale).collect())
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Ok(1.0);
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let uniform = times.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(1.0));
    if uniform && dt > 0.0 {
        Ok(dt)
    } else {
        Err(Error::NonUniformSampling)
    }
}

/// Discrete Fourier transform `F(k) = Σ d'_n e^{-2πi k n / N}` of uniformly
/// sampled data; bin `k` sits at angular frequency `2πk / (NΔt)`.
pub fn dft(rescaled: &[f64], times: &[f64]) -> Result<Spectrum> {
    if rescaled.len() != times.len() || rescaled.is_empty() {
        return Err(Error::DegenerateInput("values and times must be non-empty and equal length".into()));
    }
    let dt = uniform_step(times)?;
    let n = rescaled.len();
    let mut buf: Vec<Complex64> = rescaled.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let freqs = (0..n).map(|k| 2.0 * PI * k as f64 / (n as f64 * dt)).collect();
    Ok(Spectrum { freqs, values: buf, kind: SpectrumKind::DiscreteFft })
}

/// Trapezoidal approximation `Σ d'_n e^{iωt_n}·½(Δt_n + Δt_{n-1})` of the
/// continuous transform, with zero-width intervals outside the record.
pub fn continuous_ft(rescaled: &[f64], times: &[f64], omega_grid: &[f64]) -> Spectrum {
    let n = times.len();
    let weights: Vec<f64> = (0..n)
        .map(|k| {
            let left = if k > 0 { times[k] - times[k - 1] } else { 0.0 };
            let right = if k + 1 < n { times[k + 1] - times[k] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    let values = omega_grid
        .iter()
        .map(|&omega| {
            let (mut re, mut im) = (0.0, 0.0);
            for ((&t, &d), &w) in times.iter().zip(rescaled).zip(&weights) {
                let (s, c) = (omega * t).sin_cos();
                re += d * w * c;
                im += d * w * s;
            }
            Complex64::new(re, im)
        })
        .collect();
    Spectrum { freqs: omega_grid.to_vec(), values, kind: SpectrumKind::ContinuousTrapezoid }
}

/// `points` angular frequencies uniform on `(0, π·n_samples/t_span]`.
pub fn default_omega_grid(n_samples: usize, t_span: f64, points: usize) -> Vec<f64> {
    let top = PI * n_samples as f64 / t_span;
    (1..=points).map(|k| top * k as f64 / points as f64).collect()
}

/// Peak position, height and half-width at half maximum.
///
/// The half-width spans the lowest and highest positive frequencies whose
/// magnitude reaches half the maximum; split peaks are not resolved.
pub fn locate_peak(spectrum: &Spectrum) -> Result<PeakInfo> {
    let positive: Vec<(f64, f64)> = spectrum
        .freqs
        .iter()
        .zip(&spectrum.values)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, v)| (*w, v.norm()))
        .collect();
    let (omega_star, peak) = positive
        .iter()
        .copied()
        .fold(None, |best: Option<(f64, f64)>, (w, a)| match best {
            Some((_, b)) if b >= a => best,
            _ => Some((w, a)),
        })
        .ok_or_else(|| Error::DegeneratePeak("spectrum has no positive frequencies".into()))?;
    if !(peak > 0.0) {
        return Err(Error::DegeneratePeak("spectrum is identically zero".into()));
    }
    let above: Vec<f64> = positive.iter().filter(|(_, a)| *a >= 0.5 * peak).map(|(w, _)| *w).collect();
    let lo = above.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = above.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let d = 0.5 * (hi - lo);
    if !(d > 0.0) {
        return Err(Error::DegeneratePeak("half-maximum set is a single frequency".into()));
    }
    Ok(PeakInfo { omega_star, p_star: peak * peak, d })
}

/// Peak of the power spectrum of `e^{-γt}cos(ω₀t)`, `t ≥ 0`.
pub fn closed_form_peak(omega0: f64, gamma: f64) -> Result<PeakInfo> {
    if !(omega0 > 0.0 && gamma > 0.0) {
        return Err(Error::Domain("omega0 and gamma must be positive".into()));
    }
    let radicand = omega0 * (4.0 * gamma * gamma + omega0 * omega0).sqrt() - gamma * gamma;
    if radicand <= 0.0 {
        return Err(Error::NoRealPeak { omega0, gamma });
    }
    let ws2 = radicand;
    let omega_star = ws2.sqrt();
    let p_star = (omega0 * omega0 + ws2 + gamma * gamma) / (8.0 * gamma * gamma * omega0 * omega0);
    let d = (ws2 + 2.0 * 3f64.sqrt() * gamma * (ws2 + gamma * gamma).sqrt()).sqrt() - omega_star;
    Ok(PeakInfo { omega_star, p_star, d })
}

/// Spectrum peak of a trace: centre and rescale, then the trapezoidal
/// transform on the default grid.
pub fn trace_peak(trace: &MeasurementTrace) -> Result<PeakInfo> {
    let rescaled = center_rescale(&trace.values)?;
    let span = trace.times[trace.len() - 1] - trace.times[0];
    if !(span > 0.0) {
        return Err(Error::DegenerateInput("trace needs at least two sample times".into()));
    }
    // uniform records of n samples cover n·Δt
    let t_span = span * trace.len() as f64 / (trace.len() - 1) as f64;
    let grid = default_omega_grid(trace.len(), t_span, DEFAULT_GRID_POINTS);
    locate_peak(&continuous_ft(&rescaled, &trace.times, &grid))
}

/// Peak-equation residuals for a candidate `(ω₀, γ)`.
pub fn peak_residuals(peak: &PeakInfo, omega0: f64, gamma: f64) -> (f64, f64) {
    let ws2 = peak.omega_star * peak.omega_star;
    let g2 = gamma * gamma;
    let w2 = omega0 * omega0;
    let e1 = ws2 + g2 - omega0 * (4.0 * g2 + w2).sqrt();
    let e2 = 8.0 * g2 * w2 * peak.p_star - w2 - g2 - ws2;
    (e1, e2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierEstimate {
    pub omega: f64,
    pub gamma: f64,
    /// Final value of the residual objective (height-based estimator only).
    pub objective: Option<f64>,
}

impl FourierEstimate {
    /// Projects onto `admissible`, reporting whether anything moved.
    pub fn clipped_to(&self, admissible: &Bounds2) -> (Self, bool) {
        let [omega, gamma] = admissible.clamp([self.omega, self.gamma]);
        let moved = omega != self.omega || gamma != self.gamma;
        (Self { omega, gamma, ..*self }, moved)
    }
}

/// Height-based estimate: minimizes `|E₁| + |E₂|` from the peak position and
/// power.
pub fn strategy1(peak: &PeakInfo) -> Result<FourierEstimate> {
    let ws = peak.omega_star;
    if !(ws > 0.0 && peak.p_star > 0.0) {
        return Err(Error::DegeneratePeak("peak position and power must be positive".into()));
    }
    let denom = 8.0 * ws * ws * peak.p_star - 1.0;
    let mut gamma0 = if denom > 0.0 { (2.0 * ws / denom).sqrt() } else { f64::NAN };
    if !gamma0.is_finite() || gamma0 <= 0.0 {
        gamma0 = peak.d / 3f64.sqrt();
    }
    let bounds = Bounds2::new((0.5 * ws, 2.0 * ws), (1e-4, ws));
    let objective = |p: [f64; 2]| {
        let (e1, e2) = peak_residuals(peak, p[0], p[1]);
        e1.abs() + e2.abs()
    };
    let opts = NelderMeadOptions { tol: 1e-14, max_iters: 4000, initial_step: 0.05 };
    let mut best = nelder_mead(objective, [ws, gamma0], &bounds, &opts);
    // restart from the incumbent with a shrinking simplex; the objective is
    // not smooth along the E₁ = 0 and E₂ = 0 curves
    let mut step = 0.05;
    for _ in 0..12 {
        step *= 0.3;
        let again = nelder_mead(objective, best.x, &bounds, &NelderMeadOptions { initial_step: step, ..opts });
        if again.f < best.f {
            best = again;
        } else if step < 1e-6 {
            break;
        }
    }
    Ok(FourierEstimate { omega: best.x[0], gamma: best.x[1], objective: Some(best.f) })
}

/// How the width-based estimator maps `(ω*, γ)` back to `ω₀`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OmegaInversion {
    /// Inverts `ω*² = ω₀√(4γ² + ω₀²) − γ²`; consistent with [`closed_form_peak`].
    #[default]
    PeakEquation,
    /// `ω₀ = √(ω*² + γ²)`, the Lorentzian shortcut.
    Lorentzian,
}

/// Width-based estimate from the peak position and half-width.
pub fn strategy2(peak: &PeakInfo) -> Result<FourierEstimate> {
    strategy2_with(peak, OmegaInversion::default())
}

pub fn strategy2_with(peak: &PeakInfo, inversion: OmegaInversion) -> Result<FourierEstimate> {
    let (ws, d) = (peak.omega_star, peak.d);
    if !(ws > 0.0 && d >= 0.0) {
        return Err(Error::DegeneratePeak("peak position must be positive and width non-negative".into()));
    }
    let (ws2, d2) = (ws * ws, d * d);
    let g = (9.0 * ws2 * ws2 + 12.0 * d2 * ws2 + 12.0 * d2 * d * ws + 3.0 * d2 * d2).sqrt();
    let mut radicand = 6.0 * g - 18.0 * ws2;
    if radicand < 0.0 {
        if radicand > -1e-12 * ws2 {
            radicand = 0.0;
        } else {
            return Err(Error::DegeneratePeak(format!("negative width radicand {radicand}")));
        }
    }
    let gamma = radicand.sqrt() / 6.0;
    let g2 = gamma * gamma;
    let omega = match inversion {
        OmegaInversion::PeakEquation => (((ws2 + g2).powi(2) + 4.0 * g2 * g2).sqrt() - 2.0 * g2).sqrt(),
        OmegaInversion::Lorentzian => (ws2 + g2).sqrt(),
    };
    Ok(FourierEstimate { omega, gamma, objective: None })
}
