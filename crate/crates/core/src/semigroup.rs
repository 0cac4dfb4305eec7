//! Norms of the model decay kernels `|σ1|^k exp(-(d1 σ1² + d2 |σ2|^p) t)` on
//! `σ1 ∈ [-1/2, 1/2)`, `σ2 ∈ ℝ`, and the resulting algebraic decay rates.

use crate::fit::{fit_decay, logspace, DecayCurve, FitError};
use crate::quadrature::{integrate, QuadratureFailure};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Relative accuracy demanded of every quadrature.
pub const QUAD_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemigroupError {
    #[error("invalid decay law: {0}")]
    InvalidSpec(String),
    #[error("invalid time t = {0}")]
    InvalidTime(f64),
    #[error(transparent)]
    QuadratureFailure(#[from] QuadratureFailure),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// `sup_σ` of the kernel (the `L¹ → L∞`-type bound).
    Sup,
    /// `∫ dσ` of the kernel.
    Integral,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::Sup => "sup",
            NormKind::Integral => "integral",
        })
    }
}

impl std::str::FromStr for NormKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sup" => Ok(NormKind::Sup),
            "integral" => Ok(NormKind::Integral),
            other => Err(format!("unknown norm kind '{other}' (expected sup|integral)")),
        }
    }
}

/// Kernel `|σ1|^k exp(-(d1 σ1² + d2 |σ2|^p) t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayLawSpec {
    pub d1: f64,
    pub d2: f64,
    /// Transverse power, 2 or 4.
    pub p: u32,
    /// Weight power, 0 or 1.
    pub k: u32,
}

impl DecayLawSpec {
    pub fn new(d1: f64, d2: f64, p: u32, k: u32) -> Result<Self, SemigroupError> {
        if !(d1 > 0.0 && d1.is_finite() && d2 > 0.0 && d2.is_finite()) {
            return Err(SemigroupError::InvalidSpec(format!("d1 = {d1}, d2 = {d2} must be positive")));
        }
        if p != 2 && p != 4 {
            return Err(SemigroupError::InvalidSpec(format!("p = {p} must be 2 or 4")));
        }
        if k > 1 {
            return Err(SemigroupError::InvalidSpec(format!("k = {k} must be 0 or 1")));
        }
        Ok(Self { d1, d2, p, k })
    }

    /// Predicted exponent of `t` for the given norm.
    pub fn expected_slope(&self, kind: NormKind) -> f64 {
        let k = self.k as f64;
        match kind {
            NormKind::Sup => -0.5 * k,
            NormKind::Integral => -0.5 - 1.0 / self.p as f64 - 0.5 * k,
        }
    }
}

/// Cut-off beyond which `exp(-x)` is below `1e-17`.
const EXP_CUT: f64 = 40.0;

/// Norm of the kernel at time `t`.
pub fn kernel_norm(spec: &DecayLawSpec, t: f64, kind: NormKind) -> Result<f64, SemigroupError> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(SemigroupError::InvalidTime(t));
    }
    match kind {
        NormKind::Sup => {
            if spec.k == 0 {
                return Ok(1.0);
            }
            // s e^{-d1 t s²} peaks at s = (2 d1 t)^{-1/2}
            let s = if t > 0.0 { (1.0 / (2.0 * spec.d1 * t)).sqrt().min(0.5) } else { 0.5 };
            Ok(s * (-spec.d1 * t * s * s).exp())
        }
        NormKind::Integral => {
            if t == 0.0 {
                return Err(SemigroupError::InvalidTime(t));
            }
            let k = spec.k as i32;
            let a1 = (EXP_CUT / (spec.d1 * t)).sqrt().min(0.5);
            let i1 = 2.0 * integrate(|s| s.powi(k) * (-spec.d1 * t * s * s).exp(), 0.0, a1, QUAD_TOL * 0.1, 0.0)?;
            let p = spec.p as i32;
            let a2 = (EXP_CUT / (spec.d2 * t)).powf(1.0 / spec.p as f64);
            let i2 = 2.0 * integrate(|s| (-spec.d2 * t * s.powi(p)).exp(), 0.0, a2, QUAD_TOL * 0.1, 0.0)?;
            Ok(i1 * i2)
        }
    }
}

/// Samples `kernel_norm` at `n` log-spaced times on `[t_min, t_max]` and fits the slope over the full range.
pub fn decay_curve(spec: &DecayLawSpec, kind: NormKind, t_min: f64, t_max: f64, n: usize) -> Result<DecayCurve, SemigroupError> {
    let times = logspace(t_min, t_max, n);
    let values = times.iter().map(|&t| kernel_norm(spec, t, kind)).collect::<Result<Vec<_>, _>>()?;
    Ok(fit_decay(&times, &values, (t_min, t_max))?)
}

/// One row of the decay-rate table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub k: u32,
    pub p: u32,
    pub kind: NormKind,
    pub expected: f64,
    pub fitted: f64,
    pub std_err: f64,
}

/// Fitted and predicted slopes for every `(k, kind, p)` on `t ∈ [10, 1000]`.
pub fn rate_table(d1: f64, d2: f64) -> Result<Vec<RateRow>, SemigroupError> {
    let mut rows = Vec::new();
    for p in [4, 2] {
        for k in [0, 1] {
            let spec = DecayLawSpec::new(d1, d2, p, k)?;
            for kind in [NormKind::Sup, NormKind::Integral] {
                let c = decay_curve(&spec, kind, 10.0, 1000.0, 41)?;
                rows.push(RateRow {
                    k,
                    p,
                    kind,
                    expected: spec.expected_slope(kind),
                    fitted: c.fitted_slope,
                    std_err: c.slope_std_err,
                });
            }
        }
    }
    Ok(rows)
}
