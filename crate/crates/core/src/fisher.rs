//! Fisher information for `p(t) = e^{-γt}cos(ωt)` under white Gaussian noise,
//! and the gap between an estimator's covariance and the Cramér–Rao bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sym2_eigen, sym2_inverse};
use crate::model::SystemParams;

/// Minimum number of estimates accepted by [`crb_gap`].
pub const MIN_ESTIMATES: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherMatrix {
    pub i11: f64,
    pub i12: f64,
    pub i22: f64,
    pub sigma: f64,
    pub times: Vec<f64>,
}

impl FisherMatrix {
    pub fn as_array(&self) -> [[f64; 2]; 2] {
        [[self.i11, self.i12], [self.i12, self.i22]]
    }

    pub fn det(&self) -> f64 {
        self.i11 * self.i22 - self.i12 * self.i12
    }

    /// `I⁻¹`, the Cramér–Rao bound on the covariance of unbiased estimators.
    pub fn inverse(&self) -> Result<[[f64; 2]; 2]> {
        let (a, b, c) = sym2_inverse(self.i11, self.i12, self.i22).ok_or(Error::SingularFisher)?;
        Ok([[a, b], [b, c]])
    }
}

/// `(∂p/∂ω, ∂p/∂γ)` at time `t`.
pub fn signal_gradient(omega: f64, gamma: f64, t: f64) -> [f64; 2] {
    let env = -t * (-gamma * t).exp();
    let (s, c) = (omega * t).sin_cos();
    [env * s, env * c]
}

/// `I_ij = σ⁻² Σ_n ∂_i p(t_n) ∂_j p(t_n)`.
///
/// Angles in `params` are ignored; the signal is the pure damped cosine.
pub fn fisher_matrix(params: &SystemParams, times: &[f64], sigma: f64) -> Result<FisherMatrix> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if times.is_empty() {
        return Err(Error::DegenerateInput("empty schedule".into()));
    }
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for &t in times {
        let [dw, dg] = signal_gradient(params.omega, params.gamma, t);
        a += dw * dw;
        b += dw * dg;
        c += dg * dg;
    }
    let s2 = sigma * sigma;
    Ok(FisherMatrix { i11: a / s2, i12: b / s2, i22: c / s2, sigma, times: times.to_vec() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrbGap {
    pub n_estimates: usize,
    pub mean: [f64; 2],
    pub covariance: [[f64; 2]; 2],
    pub inv_fisher: [[f64; 2]; 2],
    /// Smallest eigenvalue of `covariance − inv_fisher`.
    pub min_eig: f64,
}

impl CrbGap {
    /// Whether `covariance − I⁻¹ + slack·tr(I⁻¹)·Id` is positive semi-definite.
    pub fn is_psd_with_slack(&self, slack: f64) -> bool {
        let tr = self.inv_fisher[0][0] + self.inv_fisher[1][1];
        self.min_eig + slack * tr >= 0.0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Unbiased sample mean and covariance of 2-vectors.
pub fn sample_covariance(points: &[[f64; 2]]) -> ([f64; 2], [[f64; 2]; 2]) {
    let n = points.len() as f64;
    let mean = [0, 1].map(|i| points.iter().map(|p| p[i]).sum::<f64>() / n);
    let mut cov = [[0.0; 2]; 2];
    for p in points {
        let d = [p[0] - mean[0], p[1] - mean[1]];
        for i in 0..2 {
            for j in 0..2 {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    let denom = n - 1.0;
    (mean, cov.map(|row| row.map(|v| v / denom)))
}

/// Compares the spread of repeated `(ω̂, γ̂)` estimates with `I⁻¹`.
pub fn crb_gap(estimates: &[[f64; 2]], fisher: &FisherMatrix) -> Result<CrbGap> {
    if estimates.len() < MIN_ESTIMATES {
        return Err(Error::DegenerateInput(format!(
            "need at least {MIN_ESTIMATES} estimates, got {}",
            estimates.len()
        )));
    }
    let inv = fisher.inverse()?;
    let (mean, covariance) = sample_covariance(estimates);
    let ([_, min_eig], _) = sym2_eigen(
        covariance[0][0] - inv[0][0],
        covariance[0][1] - inv[0][1],
        covariance[1][1] - inv[1][1],
    );
    Ok(CrbGap { n_estimates: estimates.len(), mean, covariance, inv_fisher: inv, min_eig })
}
