//! Closed-form measurement signals for the two model kinds.
//!
//! All frequencies and rates are dimensionless, expressed in units of a
//! reference frequency; times are in units of its inverse.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Below this magnitude of `Ω² − γ²/4` the Rabi response uses its critically
/// damped limit.
pub const BRANCH_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Free-induction decay with dephasing in the Hamiltonian basis.
    #[serde(rename = "fid")]
    DephasingFid,
    /// Resonantly driven Rabi oscillation with dephasing along z.
    #[serde(rename = "rabi")]
    DrivenRabi,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::DephasingFid => f.write_str("fid"),
            ModelKind::DrivenRabi => f.write_str("rabi"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fid" => Ok(ModelKind::DephasingFid),
            "rabi" => Ok(ModelKind::DrivenRabi),
            other => Err(Error::InvalidConfig(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Physical parameters of one two-level system.
///
/// For [`ModelKind::DrivenRabi`] `omega` is the Rabi frequency Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega: f64,
    pub gamma: f64,
    #[serde(default = "half_pi")]
    pub theta_i: f64,
    #[serde(default = "half_pi")]
    pub theta_m: f64,
}

fn half_pi() -> f64 {
    FRAC_PI_2
}

impl SystemParams {
    /// Parameters with initialization and measurement angles both π/2.
    pub fn new(omega: f64, gamma: f64) -> Self {
        Self { omega, gamma, theta_i: FRAC_PI_2, theta_m: FRAC_PI_2 }
    }

    pub fn with_angles(mut self, theta_i: f64, theta_m: f64) -> Self {
        self.theta_i = theta_i;
        self.theta_m = theta_m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let angle_ok = |a: f64| (0.0..=std::f64::consts::PI).contains(&a);
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::Domain(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Domain(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if !angle_ok(self.theta_i) || !angle_ok(self.theta_m) {
            return Err(Error::Domain("angles must lie in [0, pi]".into()));
        }
        Ok(())
    }

    /// Amplitudes `(α₁, α₂)` of the two basis functions for `kind`.
    pub fn amplitudes(&self, kind: ModelKind) -> [f64; 2] {
        let same = self.theta_i.sin() * self.theta_m.sin();
        let cross = self.theta_i.cos() * self.theta_m.cos();
        match kind {
            ModelKind::DephasingFid => [cross, same],
            ModelKind::DrivenRabi => [same, cross],
        }
    }
}

/// Ideal expectation value of the measured observable at time `t`.
pub fn ideal_signal(params: &SystemParams, kind: ModelKind, t: f64) -> f64 {
    let [a1, a2] = params.amplitudes(kind);
    let [g1, g2] = basis_at(kind, params.omega, params.gamma, t);
    a1 * g1 + a2 * g2
}

/// The z-response `Φ³ˣ(t)` of a driven, dephasing two-level system.
///
/// Uses `ω̂² = Ω² − γ²/4`; the overdamped branch is evaluated as a sum of
/// decaying exponentials and the critical branch as its analytic limit.
pub fn phi_x3(rabi: f64, gamma: f64, t: f64) -> f64 {
    let half = 0.5 * gamma;
    let w2 = rabi * rabi - half * half;
    if w2.abs() <= BRANCH_TOLERANCE {
        (-half * t).exp() * (1.0 + half * t)
    } else if w2 > 0.0 {
        let w = w2.sqrt();
        (-half * t).exp() * ((w * t).cos() + half / w * (w * t).sin())
    } else {
        let w = (-w2).sqrt();
        let r = half / w;
        0.5 * ((1.0 + r) * (-(half - w) * t).exp() + (1.0 - r) * (-(half + w) * t).exp())
    }
}

/// Both basis functions evaluated at `t`.
#[inline]
pub fn basis_at(kind: ModelKind, omega: f64, gamma: f64, t: f64) -> [f64; 2] {
    match kind {
        ModelKind::DephasingFid => [1.0, (-gamma * t).exp() * (omega * t).cos()],
        ModelKind::DrivenRabi => [(-gamma * t).exp(), phi_x3(omega, gamma, t)],
    }
}

/// The basis functions `(g₁, g₂)` as closures of time.
pub fn basis_functions(
    kind: ModelKind,
    omega: f64,
    gamma: f64,
) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    (
        move |t| basis_at(kind, omega, gamma, t)[0],
        move |t| basis_at(kind, omega, gamma, t)[1],
    )
}

/// Fixed benchmark table of ten `(ω, γ)` pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelTable(pub [(f64, f64); 10]);

const MODEL_TABLE: [(f64, f64); 10] = [
    (1.0000, 0.1000),
    (0.9000, 0.1000),
    (0.5003, 0.1243),
    (0.7304, 0.1875),
    (1.2161, 0.2031),
    (1.6211, 0.0993),
    (0.2218, 0.1234),
    (1.5195, 0.0751),
    (0.7551, 0.0533),
    (0.8029, 0.1921),
];

pub fn builtin_models() -> ModelTable {
    ModelTable(MODEL_TABLE)
}

impl ModelTable {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Entry by 1-based model number.
    pub fn model(&self, number: usize) -> Option<SystemParams> {
        number
            .checked_sub(1)
            .and_then(|i| self.0.get(i))
            .map(|&(w, g)| SystemParams::new(w, g))
    }

    pub fn iter(&self) -> impl Iterator<Item = SystemParams> + '_ {
        self.0.iter().map(|&(w, g)| SystemParams::new(w, g))
    }
}
