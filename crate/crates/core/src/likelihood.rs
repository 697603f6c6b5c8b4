//! Marginalized likelihood estimation of `(ω, γ)`.
//!
//! The signal is modelled as `α₁g₁(t) + α₂g₂(t)` with nonlinear parameters
//! `(ω, γ)` inside the basis functions. Amplitudes and noise scale are
//! integrated out, leaving
//!
//! ```text
//! L(ω, γ | d) = ((m_b − N)/2) · ln(1 − m_b⟨h²⟩ / (N⟨d²⟩))
//! ```
//!
//! where `h` is the projection of the data onto an orthonormalized basis.
//! The log argument is floored at [`LOG_FLOOR`] so noiseless data, which
//! drives it to zero at the true parameters, keeps a finite maximum.

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sym2_eigen;
use crate::model::{basis_at, ModelKind};
use crate::noise::MeasurementTrace;
use crate::optim::{grid_multistart, nelder_mead, Bounds2, Grid2, NelderMeadOptions};

/// Number of basis functions.
pub const M_B: usize = 2;

/// Floor for the argument of the logarithm.
pub const LOG_FLOOR: f64 = 1e-15;

/// Relative eigenvalue threshold below which the Gram matrix is singular.
const GRAM_RCOND: f64 = 1e-12;

/// Tolerance on `|α₁ ± α₂|` beyond 1 before angle recovery gives up.
pub const ANGLE_TOLERANCE: f64 = 0.05;

/// `2√(2 ln 2)`.
pub fn fwhm_gaussian_factor() -> f64 {
    2.0 * (2.0 * 2f64.ln()).sqrt()
}

/// Default search box: ω ∈ [0.05, 3], γ ∈ [0.001, 1].
pub fn default_search_box() -> Bounds2 {
    Bounds2::new((0.05, 3.0), (0.001, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisProjection {
    /// Basis rows `G_mn = g_m(t_n)`.
    pub g: [Vec<f64>; M_B],
    /// Orthonormalized rows spanning the same space.
    pub h_rows: [Vec<f64>; M_B],
    /// Projected data `H·d`.
    pub h: [f64; M_B],
}

impl BasisProjection {
    pub fn h_norm_sq(&self) -> f64 {
        self.h.iter().map(|v| v * v).sum()
    }
}

/// Orthonormalizes the basis rows of `g` through the eigendecomposition of
/// `GGᵀ` and projects `d` onto them.
pub fn orthonormal_projection(g: [Vec<f64>; M_B], d: &[f64]) -> Result<BasisProjection> {
    let n = d.len();
    if g.iter().any(|row| row.len() != n) {
        return Err(Error::DegenerateInput("basis rows and data differ in length".into()));
    }
    if n < M_B + 3 {
        return Err(Error::DegenerateInput(format!("need at least {} samples, got {n}", M_B + 3)));
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let (a, b, c) = (dot(&g[0], &g[0]), dot(&g[0], &g[1]), dot(&g[1], &g[1]));
    let (eig, vecs) = sym2_eigen(a, b, c);
    check_gram(eig)?;
    let h_rows: [Vec<f64>; M_B] = std::array::from_fn(|m| {
        let s = eig[m].sqrt().recip();
        (0..n).map(|k| s * (vecs[m][0] * g[0][k] + vecs[m][1] * g[1][k])).collect()
    });
    let h = [dot(&h_rows[0], d), dot(&h_rows[1], d)];
    Ok(BasisProjection { g, h_rows, h })
}

fn check_gram(eig: [f64; 2]) -> Result<()> {
    let ratio = eig[1] / eig[0];
    if !(eig[0] > 0.0) || !(ratio > GRAM_RCOND) {
        return Err(Error::DegenerateBasis { ratio: if ratio.is_finite() { ratio } else { 0.0 } });
    }
    Ok(())
}

/// Sufficient statistics of one likelihood evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionStats {
    pub n: usize,
    /// `‖d‖² = N⟨d²⟩`.
    pub d_norm_sq: f64,
    /// `‖h‖² = m_b⟨h²⟩`.
    pub h_norm_sq: f64,
    /// Least-squares amplitudes `(GGᵀ)⁻¹Gd`.
    pub alpha: [f64; M_B],
}

impl ProjectionStats {
    /// Fraction of the data power captured by the basis.
    pub fn captured(&self) -> f64 {
        self.h_norm_sq / self.d_norm_sq
    }

    pub fn log_likelihood(&self) -> f64 {
        let arg = (1.0 - self.captured()).max(LOG_FLOOR);
        0.5 * (M_B as f64 - self.n as f64) * arg.ln()
    }

    /// `√((N⟨d²⟩ − m_b⟨h²⟩)/(N − m_b − 2))`, floored at zero.
    pub fn sigma(&self) -> f64 {
        let s2 = (self.d_norm_sq - self.h_norm_sq) / (self.n as f64 - M_B as f64 - 2.0);
        s2.max(0.0).sqrt()
    }
}

/// Single pass over the trace: Gram matrix, basis–data products, then the
/// projection through the eigenbasis of `GGᵀ`.
pub fn projection_stats(kind: ModelKind, omega: f64, gamma: f64, times: &[f64], d: &[f64]) -> Result<ProjectionStats> {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    let (mut gd1, mut gd2, mut dd) = (0.0, 0.0, 0.0);
    for (&t, &v) in times.iter().zip(d) {
        let [g1, g2] = basis_at(kind, omega, gamma, t);
        a += g1 * g1;
        b += g1 * g2;
        c += g2 * g2;
        gd1 += g1 * v;
        gd2 += g2 * v;
        dd += v * v;
    }
    if !(dd > 0.0) {
        return Err(Error::DegenerateInput("data vector is zero".into()));
    }
    let (eig, vecs) = sym2_eigen(a, b, c);
    check_gram(eig)?;
    let mut h_norm_sq = 0.0;
    let mut alpha = [0.0; 2];
    for m in 0..2 {
        let proj = vecs[m][0] * gd1 + vecs[m][1] * gd2;
        h_norm_sq += proj * proj / eig[m];
        alpha[0] += vecs[m][0] * proj / eig[m];
        alpha[1] += vecs[m][1] * proj / eig[m];
    }
    Ok(ProjectionStats { n: d.len(), d_norm_sq: dd, h_norm_sq, alpha })
}

/// Marginal log-likelihood of `(omega, gamma)` given the trace.
pub fn log_likelihood(omega: f64, gamma: f64, trace: &MeasurementTrace, kind: ModelKind) -> Result<f64> {
    Ok(projection_stats(kind, omega, gamma, &trace.times, &trace.values)?.log_likelihood())
}

/// Log-likelihood on every grid point in scan order; failed evaluations are NaN.
pub fn likelihood_grid(trace: &MeasurementTrace, kind: ModelKind, grid: &Grid2) -> Vec<f64> {
    grid.points()
        .map(|p| log_likelihood(p[0], p[1], trace, kind).unwrap_or(f64::NAN))
        .collect()
}

/// Residual noise scale from a projection.
pub fn estimate_noise_sigma(projection: &BasisProjection, d: &[f64]) -> f64 {
    let dd: f64 = d.iter().map(|v| v * v).sum();
    let s2 = (dd - projection.h_norm_sq()) / (d.len() as f64 - M_B as f64 - 2.0);
    s2.max(0.0).sqrt()
}

/// Least-squares amplitudes of the two basis functions at `(omega, gamma)`.
pub fn estimate_amplitudes(omega: f64, gamma: f64, trace: &MeasurementTrace, kind: ModelKind) -> Result<[f64; 2]> {
    Ok(projection_stats(kind, omega, gamma, &trace.times, &trace.values)?.alpha)
}

fn clamped_acos(x: f64) -> Result<f64> {
    if x.abs() > 1.0 + ANGLE_TOLERANCE || x.is_nan() {
        return Err(Error::AngleRecovery(x));
    }
    Ok(x.clamp(-1.0, 1.0).acos())
}

/// Initialization and measurement angles `(θ_I, θ_M)` from basis amplitudes.
pub fn angles_from_alphas(alpha1: f64, alpha2: f64, kind: ModelKind) -> Result<(f64, f64)> {
    let (diff, sum) = match kind {
        ModelKind::DephasingFid => (alpha1 - alpha2, alpha1 + alpha2),
        ModelKind::DrivenRabi => (alpha2 - alpha1, alpha2 + alpha1),
    };
    let (a, b) = (clamped_acos(diff)?, clamped_acos(sum)?);
    Ok((0.5 * (a + b), 0.5 * (a - b)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwhmOptions {
    pub bounds: Bounds2,
    /// Multiplier from full width to reported uncertainty.
    pub conversion_factor: f64,
    pub initial_step: f64,
    pub resolution: f64,
}

impl Default for FwhmOptions {
    fn default() -> Self {
        Self {
            bounds: default_search_box(),
            conversion_factor: fwhm_gaussian_factor(),
            initial_step: 1e-4,
            resolution: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwhmResult {
    pub fwhm_omega: f64,
    pub fwhm_gamma: f64,
    pub d_omega: f64,
    pub d_gamma: f64,
    /// Set when the half-maximum crossing was not found inside the box on
    /// some side of that axis.
    pub saturated_omega: bool,
    pub saturated_gamma: bool,
}

/// Widths of the likelihood peak along the ω and γ axes through the maximum.
///
/// Each side is scanned with a doubling step until `exp(L)` drops below half
/// its peak value, then the crossing is bisected.
pub fn fwhm_uncertainty<F>(log_l: F, omega_hat: f64, gamma_hat: f64, opts: &FwhmOptions) -> FwhmResult
where
    F: Fn(f64, f64) -> f64,
{
    let centre = [omega_hat, gamma_hat];
    let peak = log_l(omega_hat, gamma_hat);
    let threshold = peak - 2f64.ln();
    let at = |axis: usize, x: f64| {
        let mut p = centre;
        p[axis] = x;
        let v = log_l(p[0], p[1]);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    let side = |axis: usize, dir: f64| -> (f64, bool) {
        let limit = if dir > 0.0 { opts.bounds.hi[axis] - centre[axis] } else { centre[axis] - opts.bounds.lo[axis] };
        if limit <= 0.0 {
            return (0.0, true);
        }
        let mut inside = 0.0;
        let mut step = opts.initial_step.min(limit);
        loop {
            let v = at(axis, centre[axis] + dir * step);
            if v < threshold {
                break;
            }
            inside = step;
            if step >= limit {
                return (limit, true);
            }
            step = (2.0 * step).min(limit);
        }
        let mut outside = step;
        while outside - inside > opts.resolution {
            let mid = 0.5 * (inside + outside);
            if at(axis, centre[axis] + dir * mid) < threshold {
                outside = mid;
            } else {
                inside = mid;
            }
        }
        (0.5 * (inside + outside), false)
    };

    let width = |axis: usize| {
        let (up, sat_up) = side(axis, 1.0);
        let (down, sat_down) = side(axis, -1.0);
        if sat_up || sat_down {
            (opts.bounds.width(axis), true)
        } else {
            (up + down, false)
        }
    };
    let (fwhm_omega, saturated_omega) = width(0);
    let (fwhm_gamma, saturated_gamma) = width(1);
    FwhmResult {
        fwhm_omega,
        fwhm_gamma,
        d_omega: opts.conversion_factor * fwhm_omega,
        d_gamma: opts.conversion_factor * fwhm_gamma,
        saturated_omega,
        saturated_gamma,
    }
}

/// Settings for the likelihood maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strategy3Options {
    pub search: Bounds2,
    pub grid: (usize, usize),
    pub polish: NelderMeadOptions,
    /// Compute FWHM uncertainties; `None` leaves them NaN.
    pub uncertainty: Option<FwhmOptions>,
}

impl Default for Strategy3Options {
    fn default() -> Self {
        Self {
            search: default_search_box(),
            grid: (60, 40),
            polish: NelderMeadOptions { tol: 1e-10, max_iters: 4000, initial_step: 0.05 },
            uncertainty: Some(FwhmOptions::default()),
        }
    }
}

impl Strategy3Options {
    /// Point estimates only.
    pub fn fast() -> Self {
        Self { uncertainty: None, ..Self::default() }
    }
}

mod nan_null {
    use super::*;

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(de)?.unwrap_or(f64::NAN))
    }

    pub fn deserialize_pair<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<[f64; 2], D::Error> {
        Ok(<[Option<f64>; 2]>::deserialize(de)?.map(|v| v.unwrap_or(f64::NAN)))
    }
}

/// Output of the likelihood estimator. Non-finite numbers serialize as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub omega: f64,
    pub gamma: f64,
    #[serde(deserialize_with = "nan_null::deserialize")]
    pub log_l_max: f64,
    #[serde(deserialize_with = "nan_null::deserialize")]
    pub sigma_est: f64,
    #[serde(deserialize_with = "nan_null::deserialize_pair")]
    pub alpha: [f64; 2],
    #[serde(deserialize_with = "nan_null::deserialize")]
    pub d_omega: f64,
    #[serde(deserialize_with = "nan_null::deserialize")]
    pub d_gamma: f64,
    #[serde(default)]
    pub uncertainty_saturated: bool,
    #[serde(default)]
    pub theta_i_est: Option<f64>,
    #[serde(default)]
    pub theta_m_est: Option<f64>,
}

impl FitResult {
    /// A result carrying point estimates only.
    pub fn point(omega: f64, gamma: f64) -> Self {
        Self {
            omega,
            gamma,
            log_l_max: f64::NAN,
            sigma_est: f64::NAN,
            alpha: [f64::NAN; 2],
            d_omega: f64::NAN,
            d_gamma: f64::NAN,
            uncertainty_saturated: false,
            theta_i_est: None,
            theta_m_est: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Maximizes the marginal likelihood: coarse grid, then Nelder–Mead polish in
/// a window around the best cell.
pub fn strategy3(trace: &MeasurementTrace, kind: ModelKind, opts: &Strategy3Options) -> Result<FitResult> {
    if trace.len() < M_B + 3 {
        return Err(Error::DegenerateInput(format!("need at least {} samples, got {}", M_B + 3, trace.len())));
    }
    let neg_l = |p: [f64; 2]| match log_likelihood(p[0], p[1], trace, kind) {
        Ok(v) => -v,
        Err(_) => f64::INFINITY,
    };
    let grid = Grid2::new(opts.search, opts.grid);
    let (start, best) = grid_multistart(neg_l, &grid);
    if !best.is_finite() {
        return Err(Error::EstimationFailed("likelihood degenerate on every grid point".into()));
    }

    // polish inside ±3 cells; recentre if the optimum sits on a window edge
    let cell = grid.cell_size();
    let mut x = start;
    let mut f = best;
    for _ in 0..8 {
        let window = Bounds2 {
            lo: [(x[0] - 3.0 * cell[0]).max(opts.search.lo[0]), (x[1] - 3.0 * cell[1]).max(opts.search.lo[1])],
            hi: [(x[0] + 3.0 * cell[0]).min(opts.search.hi[0]), (x[1] + 3.0 * cell[1]).min(opts.search.hi[1])],
        };
        let r = nelder_mead(neg_l, x, &window, &opts.polish);
        if r.f <= f {
            x = r.x;
            f = r.f;
        }
        let on_inner_edge = (0..2).any(|i| {
            let tol = 1e-9 * cell[i];
            (x[i] - window.lo[i] < tol && window.lo[i] > opts.search.lo[i])
                || (window.hi[i] - x[i] < tol && window.hi[i] < opts.search.hi[i])
        });
        if !on_inner_edge {
            break;
        }
    }

    let stats = projection_stats(kind, x[0], x[1], &trace.times, &trace.values)?;
    let (theta_i_est, theta_m_est) = match angles_from_alphas(stats.alpha[0], stats.alpha[1], kind) {
        Ok((ti, tm)) => (Some(ti), Some(tm)),
        Err(_) => (None, None),
    };
    let mut fit = FitResult {
        omega: x[0],
        gamma: x[1],
        log_l_max: stats.log_likelihood(),
        sigma_est: stats.sigma(),
        alpha: stats.alpha,
        d_omega: f64::NAN,
        d_gamma: f64::NAN,
        uncertainty_saturated: false,
        theta_i_est,
        theta_m_est,
    };
    if let Some(fwhm_opts) = opts.uncertainty {
        let log_l = |w: f64, g: f64| log_likelihood(w, g, trace, kind).unwrap_or(f64::NAN);
        let u = fwhm_uncertainty(log_l, x[0], x[1], &fwhm_opts);
        fit.d_omega = u.d_omega;
        fit.d_gamma = u.d_gamma;
        fit.uncertainty_saturated = u.saturated_omega || u.saturated_gamma;
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_models, SystemParams};
    use crate::noise::{simulate_trace, uniform_times, NoiseSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::{FRAC_PI_2, PI};

    const FID: ModelKind = ModelKind::DephasingFid;
    const RABI: ModelKind = ModelKind::DrivenRabi;

    fn trace(params: SystemParams, kind: ModelKind, noise: NoiseSpec, seed: u64) -> MeasurementTrace {
        simulate_trace(&params, kind, &uniform_times(100, 30.0), noise, seed).unwrap()
    }

    fn basis_rows(kind: ModelKind, omega: f64, gamma: f64, times: &[f64]) -> [Vec<f64>; 2] {
        [
            times.iter().map(|&t| basis_at(kind, omega, gamma, t)[0]).collect(),
            times.iter().map(|&t| basis_at(kind, omega, gamma, t)[1]).collect(),
        ]
    }

    #[test]
    fn projection_rows_are_orthonormal() {
        let times = uniform_times(100, 30.0);
        for kind in [FID, RABI] {
            let g = basis_rows(kind, 0.9, 0.1, &times);
            let p = orthonormal_projection(g, &vec![1.0; 100]).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let dot: f64 = p.h_rows[i].iter().zip(&p.h_rows[j]).map(|(a, b)| a * b).sum();
                    assert!((dot - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn projection_identity_and_span_cases() {
        let s = 0.5f64.sqrt();
        let g = [vec![s, s, 0.0, 0.0, 0.0], vec![0.0, 0.0, s, -s, 0.0]];
        let in_span = [3.0 * s, 3.0 * s, s, -s, 0.0];
        let p = orthonormal_projection(g.clone(), &in_span).unwrap();
        let d2: f64 = in_span.iter().map(|v| v * v).sum();
        assert!((p.h_norm_sq() - d2).abs() < 1e-10);
        let ortho = [1.0, -1.0, 1.0, 1.0, 2.0];
        let p = orthonormal_projection(g, &ortho).unwrap();
        assert!(p.h.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn degenerate_basis_is_rejected() {
        let times = uniform_times(20, 1.0);
        let g = [vec![1.0; 20], vec![2.0; 20]];
        assert!(matches!(orthonormal_projection(g, &times), Err(Error::DegenerateBasis { .. })));
    }

    #[test]
    fn fast_path_matches_explicit_projection() {
        let tr = trace(SystemParams::new(0.73, 0.19), FID, NoiseSpec::Gaussian { sigma: 0.05 }, 8);
        for (w, g) in [(0.7, 0.2), (1.5, 0.05), (0.3, 0.8)] {
            let p = orthonormal_projection(basis_rows(FID, w, g, &tr.times), &tr.values).unwrap();
            let s = projection_stats(FID, w, g, &tr.times, &tr.values).unwrap();
            assert!((p.h_norm_sq() - s.h_norm_sq).abs() < 1e-10 * s.d_norm_sq);
            assert!((estimate_noise_sigma(&p, &tr.values) - s.sigma()).abs() < 1e-10);
        }
    }

    #[test]
    fn noise_estimate_consistent_for_long_traces() {
        let times = uniform_times(10_000, 30.0);
        let tr = simulate_trace(&SystemParams::new(1.0, 0.1), FID, &times, NoiseSpec::Gaussian { sigma: 0.07 }, 12).unwrap();
        let fit = projection_stats(FID, 1.0, 0.1, &tr.times, &tr.values).unwrap();
        assert!((fit.sigma() / 0.07 - 1.0).abs() < 0.02, "{}", fit.sigma());
        let zero = MeasurementTrace { values: tr.values.iter().zip(&times).map(|(v, &t)| v - crate::model::ideal_signal(&SystemParams::new(1.0, 0.1), FID, t)).collect(), ..tr };
        let s = projection_stats(FID, 1.0, 0.1, &zero.times, &zero.values).unwrap();
        assert!((s.sigma() / 0.07 - 1.0).abs() < 0.02);
    }

    #[test]
    fn noiseless_in_span_sigma_is_zero() {
        let tr = trace(SystemParams::new(0.9, 0.1), FID, NoiseSpec::None, 0);
        let p = orthonormal_projection(basis_rows(FID, 0.9, 0.1, &tr.times), &tr.values).unwrap();
        assert!(estimate_noise_sigma(&p, &tr.values) < 1e-7);
    }

    #[test]
    fn noiseless_truth_beats_neighbour() {
        let tr = trace(SystemParams::new(1.0, 0.1), FID, NoiseSpec::None, 0);
        let at_truth = log_likelihood(1.0, 0.1, &tr, FID).unwrap();
        let off = log_likelihood(1.1, 0.1, &tr, FID).unwrap();
        assert!((at_truth - 0.5 * (2.0 - 100.0) * LOG_FLOOR.ln()).abs() < 1e-6);
        assert!(at_truth > off);
    }

    #[test]
    fn pure_noise_captures_about_rank_over_n() {
        let times = uniform_times(100, 30.0);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut total = 0.0;
        let runs = 1000;
        for seed in 0..runs {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d: Vec<f64> = times.iter().map(|_| normal.sample(&mut rng)).collect();
            total += projection_stats(FID, 1.0, 0.1, &times, &d).unwrap().captured();
        }
        let mean = total / runs as f64;
        // E[χ²₂ / χ²₁₀₀] = 2/100 for a fixed rank-2 projection
        assert!((mean - 0.02).abs() < 0.003, "{mean}");
    }

    #[test]
    fn likelihood_invariant_under_scaling() {
        let tr = trace(SystemParams::new(0.9, 0.1), FID, NoiseSpec::Gaussian { sigma: 0.05 }, 2);
        let mut scaled = tr.clone();
        scaled.values.iter_mut().for_each(|v| *v *= -3.7);
        for (w, g) in [(0.9, 0.1), (0.5, 0.3)] {
            let a = log_likelihood(w, g, &tr, FID).unwrap();
            let b = log_likelihood(w, g, &scaled, FID).unwrap();
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn noiseless_model_one_recovery() {
        let tr = trace(SystemParams::new(1.0, 0.1), FID, NoiseSpec::None, 0);
        let fit = strategy3(&tr, FID, &Strategy3Options::default()).unwrap();
        assert!((fit.omega - 1.0).abs() < 1e-6 && (fit.gamma - 0.1).abs() < 1e-7, "{fit:?}");
        assert!(fit.sigma_est < 1e-6);
        assert!(fit.alpha[0].abs() < 1e-8 && (fit.alpha[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn noiseless_rabi_recovery() {
        let p = builtin_models().model(7).unwrap().with_angles(PI / 3.0, PI / 4.0);
        let tr = trace(p, RABI, NoiseSpec::None, 0);
        let fit = strategy3(&tr, RABI, &Strategy3Options::fast()).unwrap();
        assert!((fit.omega / p.omega - 1.0).abs() < 1e-6 && (fit.gamma / p.gamma - 1.0).abs() < 1e-6);
        let expected = p.amplitudes(RABI);
        assert!((fit.alpha[0] - expected[0]).abs() < 1e-6 && (fit.alpha[1] - expected[1]).abs() < 1e-6);
        let (ti, tm) = angles_from_alphas(fit.alpha[0], fit.alpha[1], RABI).unwrap();
        assert!((ti - PI / 3.0).abs() < 1e-4 && (tm - PI / 4.0).abs() < 1e-4);
    }

    #[test]
    fn amplitude_examples() {
        let times = uniform_times(100, 30.0);
        let ones = MeasurementTrace::new(times.clone(), vec![1.0; 100], NoiseSpec::None, 0).unwrap();
        let a = estimate_amplitudes(1.0, 0.1, &ones, FID).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-12 && a[1].abs() < 1e-12);
    }

    #[test]
    fn angle_examples() {
        let (ti, tm) = angles_from_alphas(0.0, 1.0, FID).unwrap();
        assert!((ti - FRAC_PI_2).abs() < 1e-15 && (tm - FRAC_PI_2).abs() < 1e-15);
        let (ti, tm) = angles_from_alphas(1.0, 0.0, FID).unwrap();
        assert!(ti.abs() < 1e-15 && tm.abs() < 1e-15);
        // slightly out of range is clamped, far out is rejected
        assert!(angles_from_alphas(0.02, 1.01, FID).is_ok());
        assert!(matches!(angles_from_alphas(0.2, 1.0, FID), Err(Error::AngleRecovery(_))));
    }

    #[test]
    fn angle_inversion_round_trip() {
        for (ti, tm) in [(1.2, 0.4), (PI / 3.0, PI / 4.0), (0.3, 0.1)] {
            for kind in [FID, RABI] {
                let [a1, a2] = SystemParams::new(1.0, 0.1).with_angles(ti, tm).amplitudes(kind);
                let (ri, rm) = angles_from_alphas(a1, a2, kind).unwrap();
                assert!((ri - ti).abs() < 1e-9 && (rm - tm).abs() < 1e-9, "{kind}: {ri} {rm}");
            }
        }
    }

    #[test]
    fn fwhm_of_quadratic() {
        let s = 0.01;
        let opts = FwhmOptions { bounds: Bounds2::new((0.0, 2.0), (0.0, 2.0)), ..Default::default() };
        let u = fwhm_uncertainty(|w, g| 5.0 - (w - 1.0).powi(2) / (2.0 * s * s) - (g - 0.5).powi(2) / (2.0 * 4.0 * s * s), 1.0, 0.5, &opts);
        let k = fwhm_gaussian_factor();
        assert!((u.fwhm_omega - k * s).abs() < 2e-6);
        assert!((u.fwhm_gamma - k * 2.0 * s).abs() < 2e-6);
        assert!((u.d_omega - k * k * s).abs() < 1e-5);
        assert!(!u.saturated_omega && !u.saturated_gamma);
    }

    #[test]
    fn fwhm_saturates_on_flat_surface() {
        let opts = FwhmOptions { bounds: Bounds2::new((0.0, 2.0), (0.0, 1.0)), ..Default::default() };
        let u = fwhm_uncertainty(|_, _| 1.0, 1.0, 0.5, &opts);
        assert!(u.saturated_omega && u.saturated_gamma);
        assert_eq!(u.fwhm_omega, 2.0);
        assert_eq!(u.fwhm_gamma, 1.0);
    }

    #[test]
    fn fit_result_json_uses_null_for_nan() {
        let fit = FitResult::point(1.0, 0.1);
        let json = fit.to_json().unwrap();
        assert!(json.contains("\"sigma_est\":null"));
        let back: FitResult = serde_json::from_str(&json).unwrap();
        assert!(back.sigma_est.is_nan() && back.omega == 1.0);
    }

    #[test]
    fn short_trace_rejected() {
        let tr = MeasurementTrace::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 0.5, 0.0, -0.5], NoiseSpec::None, 0).unwrap();
        assert!(matches!(strategy3(&tr, FID, &Strategy3Options::fast()), Err(Error::DegenerateInput(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn captured_fraction_bounded(
                seed in 0u64..10_000,
                w in 0.05f64..3.0,
                g in 0.001f64..1.0,
                rabi in any::<bool>(),
            ) {
                let kind = if rabi { RABI } else { FID };
                let tr = trace(SystemParams::new(0.8, 0.15), kind, NoiseSpec::Gaussian { sigma: 0.1 }, seed);
                if let Ok(s) = projection_stats(kind, w, g, &tr.times, &tr.values) {
                    prop_assert!(s.captured() >= 0.0 && s.captured() <= 1.0 + 1e-12);
                }
            }
        }
    }
}
