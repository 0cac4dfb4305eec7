//! Small-`σ` expansion of the critical branch: Fourier symbols `μ_j`, the
//! auxiliary `η` quantities, the closed-form zigzag coefficient, the zigzag
//! boundary `κ_z(ε)`, and least-squares dispersion fits of computed branches.

use crate::bloch::{critical_branch, BlochError, EigenBranch};
use crate::params::{axes_grid, Params, ParamsError, SigmaPoint};
use crate::roll::{roll_series_reference, solve_roll, RollError};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative agreement required between the direct and split `η` forms.
pub const ETA_FORM_TOL: f64 = 1e-12;
/// Largest tolerated condition number of a dispersion-fit design matrix.
pub const MAX_FIT_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpansionError {
    #[error("mu_(+-3) + kappa^2 = {value:.3e} is within 1e-8 of zero")]
    NearResonance { value: f64 },
    #[error("eta forms disagree by {0:.3e}")]
    FormMismatch(f64),
    #[error("no sign change of c2 on the bracket [{lo}, {hi}]")]
    NoRoot { lo: f64, hi: f64 },
    #[error("ill-conditioned dispersion fit: {0}")]
    IllConditionedFit(String),
    #[error("kappa = {0} outside the domain kappa > -4/5")]
    OutOfDomain(f64),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Roll(#[from] RollError),
    #[error(transparent)]
    Bloch(#[from] BlochError),
}

/// `μ_j(σ) = -(1 - (1+κ)(j+σ1)² - σ2²)²`.
pub fn mu(j: i64, kappa: f64, sigma: SigmaPoint) -> f64 {
    let g = 1.0 - (1.0 + kappa) * (j as f64 + sigma.sigma1).powi(2) - sigma.sigma2 * sigma.sigma2;
    -g * g
}

/// `[∂μ_j/∂σ1, ∂μ_j/∂σ2]`.
pub fn mu_gradient(j: i64, kappa: f64, sigma: SigmaPoint) -> [f64; 2] {
    let x = j as f64 + sigma.sigma1;
    let g = 1.0 - (1.0 + kappa) * x * x - sigma.sigma2 * sigma.sigma2;
    let g1 = -2.0 * (1.0 + kappa) * x;
    let g2 = -2.0 * sigma.sigma2;
    [-2.0 * g * g1, -2.0 * g * g2]
}

/// `[∂11 μ_j, ∂12 μ_j, ∂22 μ_j]`.
pub fn mu_hessian(j: i64, kappa: f64, sigma: SigmaPoint) -> [f64; 3] {
    let x = j as f64 + sigma.sigma1;
    let g = 1.0 - (1.0 + kappa) * x * x - sigma.sigma2 * sigma.sigma2;
    let g1 = -2.0 * (1.0 + kappa) * x;
    let g2 = -2.0 * sigma.sigma2;
    [
        -2.0 * (g1 * g1 + g * (-2.0 * (1.0 + kappa))),
        -2.0 * g1 * g2,
        -2.0 * (g2 * g2 + g * -2.0),
    ]
}

/// Parts of `μ_m` of even and odd total degree in `σ`, built from the
/// polynomial expansion (not from `μ_{-m}`).
pub fn mu_split(m: i64, kappa: f64, sigma: SigmaPoint) -> (f64, f64) {
    let (s1, s2) = (sigma.sigma1, sigma.sigma2);
    let mf = m as f64;
    let ge = 1.0 - (1.0 + kappa) * (mf * mf + s1 * s1) - s2 * s2;
    let go = -2.0 * (1.0 + kappa) * mf * s1;
    (-(ge * ge + go * go), -2.0 * ge * go)
}

/// `η^±_0 = 1/(μ_3+κ²) ± 1/(μ_{-3}+κ²)`, `η^±_1` the same with squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaTerms {
    pub eta_plus0: f64,
    pub eta_minus0: f64,
    pub eta_plus1: f64,
    pub eta_minus1: f64,
}

impl EtaTerms {
    fn as_array(&self) -> [f64; 4] {
        [self.eta_plus0, self.eta_minus0, self.eta_plus1, self.eta_minus1]
    }

    /// Largest relative discrepancy between two evaluations.
    pub fn max_relative_diff(&self, other: &EtaTerms) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

fn resonance_guard(v: f64) -> Result<(), ExpansionError> {
    if v.abs() < 1e-8 {
        Err(ExpansionError::NearResonance { value: v })
    } else {
        Ok(())
    }
}

/// Direct form, from `μ_{±3}`.
pub fn eta_terms_direct(kappa: f64, sigma: SigmaPoint) -> Result<EtaTerms, ExpansionError> {
    let k2 = kappa * kappa;
    let p = mu(3, kappa, sigma) + k2;
    let m = mu(-3, kappa, sigma) + k2;
    resonance_guard(p)?;
    resonance_guard(m)?;
    Ok(EtaTerms {
        eta_plus0: 1.0 / p + 1.0 / m,
        eta_minus0: 1.0 / p - 1.0 / m,
        eta_plus1: 1.0 / (p * p) + 1.0 / (m * m),
        eta_minus1: 1.0 / (p * p) - 1.0 / (m * m),
    })
}

/// Split form, from `μ^e_3` and `μ^Δ_3`: with `A = μ^e + κ²`, `B = μ^Δ`,
/// `η^+_0 = 2A/(A²-B²)`, `η^-_0 = -2B/(A²-B²)`, `η^+_1 = 2(A²+B²)/(A²-B²)²`,
/// `η^-_1 = -4AB/(A²-B²)²`.
pub fn eta_terms_split(kappa: f64, sigma: SigmaPoint) -> Result<EtaTerms, ExpansionError> {
    let (e, d) = mu_split(3, kappa, sigma);
    let a = e + kappa * kappa;
    resonance_guard(a + d)?;
    resonance_guard(a - d)?;
    let den = (a + d) * (a - d);
    Ok(EtaTerms {
        eta_plus0: 2.0 * a / den,
        eta_minus0: -2.0 * d / den,
        eta_plus1: 2.0 * (a * a + d * d) / (den * den),
        eta_minus1: -4.0 * a * d / (den * den),
    })
}

/// All four `η` quantities; both forms are evaluated and must agree.
pub fn eta_terms(kappa: f64, sigma: SigmaPoint) -> Result<EtaTerms, ExpansionError> {
    let direct = eta_terms_direct(kappa, sigma)?;
    let split = eta_terms_split(kappa, sigma)?;
    let diff = direct.max_relative_diff(&split);
    if diff > ETA_FORM_TOL {
        return Err(ExpansionError::FormMismatch(diff));
    }
    Ok(direct)
}

/// Closed-form zigzag quotient
/// `-[2κ + (9/32) a1⁴ (9κ+8) / (64 (1+κ)² (5κ+4)²)] / [1 + (9/32) a1⁴ / (128 (1+κ)² (5κ+4)²)]`.
///
/// This is the coefficient of `+σ2²` in `λ(0, σ2)`; the dispersion
/// coefficient `c2` (with `λ ≈ -c2 σ2²`) is its negative, see [`c2_main`].
pub fn c2_closed(_eps: f64, kappa: f64, a1: f64) -> Result<f64, ExpansionError> {
    if kappa <= -0.8 {
        return Err(ExpansionError::OutOfDomain(kappa));
    }
    let a4 = a1.powi(4);
    let q = (1.0 + kappa).powi(2) * (5.0 * kappa + 4.0).powi(2);
    let num = 2.0 * kappa + (9.0 / 32.0) * a4 * (9.0 * kappa + 8.0) / (64.0 * q);
    let den = 1.0 + (9.0 / 32.0) * a4 / (128.0 * q);
    Ok(-num / den)
}

/// Dispersion-convention coefficient `c2 = -c2_closed`.
pub fn c2_main(eps: f64, kappa: f64, a1: f64) -> Result<f64, ExpansionError> {
    Ok(-c2_closed(eps, kappa, a1)?)
}

/// Leading-order zigzag boundary `κ_z ≈ -ε⁴/512`.
pub fn kappa_z_series(eps: f64) -> f64 {
    -eps.powi(4) / 512.0
}

/// Where the closed form takes its `a1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum A1Source {
    /// Converged roll solution at each `κ`.
    #[default]
    Roll,
    /// Two-term series `ã + ã³/512`.
    Series,
}

pub fn a1_from(source: A1Source, eps: f64, kappa: f64) -> Result<f64, ExpansionError> {
    match source {
        A1Source::Series => Ok(roll_series_reference(eps, kappa).0),
        A1Source::Roll => Ok(solve_roll(Params::new(eps, kappa)?, crate::roll::DEFAULT_N_MODES)?.a1()),
    }
}

/// Root of the closed-form quotient in `(-ε/2, 0]` by bisection.
pub fn kappa_z_closed_root(eps: f64, source: A1Source) -> Result<f64, ExpansionError> {
    let f = |k: f64| -> Result<f64, ExpansionError> { c2_closed(eps, k, a1_from(source, eps, k)?) };
    let (mut lo, mut hi) = (-0.5 * eps, 0.0);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(ExpansionError::NoRoot { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Coefficients of `λ(σ1,0) ≈ -c1 σ1²` and `λ(0,σ2) ≈ -c2 σ2² - c3 σ2⁴`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionFit {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Max fit residual relative to the largest fitted value.
    pub fit_residual: f64,
    pub fit_radius: f64,
}

/// Least squares in the scaled powers `(s/r)^{2k}`, `k = 1..=terms`.
fn even_power_fit(s: &[f64], y: &[f64], r: f64, terms: usize) -> Result<(Vec<f64>, f64), ExpansionError> {
    let a = DMatrix::from_fn(s.len(), terms, |i, k| (s[i] / r).powi(2 * (k as i32 + 1)));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > MAX_FIT_CONDITION {
        return Err(ExpansionError::IllConditionedFit(format!("condition number {cond:.3e}")));
    }
    let b = svd
        .solve(&DVector::from_column_slice(y), 0.0)
        .map_err(|e| ExpansionError::IllConditionedFit(e.to_string()))?;
    let resid = (&a * &b - DVector::from_column_slice(y)).amax();
    let coeffs: Vec<f64> = b.iter().enumerate().map(|(k, bk)| bk / r.powi(2 * (k as i32 + 1))).collect();
    Ok((coeffs, resid))
}

/// Fits the branch along both axes within `fit_radius`.
pub fn fit_dispersion(branch: &EigenBranch, fit_radius: f64) -> Result<DispersionFit, ExpansionError> {
    let mut s1 = Vec::new();
    let mut y1 = Vec::new();
    let mut s2 = Vec::new();
    let mut y2 = Vec::new();
    for (s, l) in branch.grid.iter().zip(&branch.lambdas) {
        if s.norm() == 0.0 || s.norm() > fit_radius * (1.0 + 1e-12) {
            continue;
        }
        if s.sigma2 == 0.0 {
            s1.push(s.sigma1);
            y1.push(*l);
        } else if s.sigma1 == 0.0 {
            s2.push(s.sigma2);
            y2.push(*l);
        }
    }
    if s1.is_empty() || s2.len() < 2 {
        return Err(ExpansionError::IllConditionedFit(format!(
            "need points on both axes within r = {fit_radius} (got {} and {})",
            s1.len(),
            s2.len()
        )));
    }
    let t1 = (s1.len() - 1).clamp(1, 3);
    let t2 = (s2.len() - 1).clamp(2, 4);
    let (b1, r1) = even_power_fit(&s1, &y1, fit_radius, t1)?;
    let (b2, r2) = even_power_fit(&s2, &y2, fit_radius, t2)?;
    let scale = y1.iter().chain(&y2).fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    Ok(DispersionFit {
        c1: -b1[0],
        c2: -b2[0],
        c3: -b2[1],
        fit_residual: r1.max(r2) / scale,
        fit_radius,
    })
}

/// Settings for spectral dispersion fits.
#[derive(Debug, Clone)]
pub struct SpectralFitOptions {
    pub n_modes: usize,
    pub truncation: usize,
    pub fit_radius: f64,
    /// Points per axis.
    pub n_axis: usize,
}

impl Default for SpectralFitOptions {
    fn default() -> Self {
        Self { n_modes: crate::roll::DEFAULT_N_MODES, truncation: crate::bloch::DEFAULT_TRUNCATION, fit_radius: 0.2, n_axis: 20 }
    }
}

/// Solves the roll, computes the branch on the two axes and fits it.
pub fn spectral_dispersion(params: Params, opts: &SpectralFitOptions) -> Result<DispersionFit, ExpansionError> {
    let roll = solve_roll(params, opts.n_modes)?;
    let grid = axes_grid(opts.fit_radius, opts.n_axis);
    let j = opts.truncation.max(2 * roll.highest_harmonic());
    let branch = critical_branch(&roll, &grid, j)?;
    fit_dispersion(&branch, opts.fit_radius)
}

/// Root of the fitted `c2(κ)` by the secant method, started from the
/// series estimate.
pub fn kappa_z_spectral(eps: f64, opts: &SpectralFitOptions) -> Result<f64, ExpansionError> {
    let c2 = |k: f64| -> Result<f64, ExpansionError> { Ok(spectral_dispersion(Params::new(eps, k)?, opts)?.c2) };
    let mut k0 = 0.0;
    let mut k1 = kappa_z_series(eps);
    let mut f0 = c2(k0)?;
    let mut f1 = c2(k1)?;
    for _ in 0..30 {
        if f1 == f0 {
            break;
        }
        let k2 = k1 - f1 * (k1 - k0) / (f1 - f0);
        if !(k2 > -0.5 * eps && k2 <= 0.0) {
            return Err(ExpansionError::NoRoot { lo: -0.5 * eps, hi: 0.0 });
        }
        let done = (k2 - k1).abs() <= 1e-14 * eps.powi(4).max(k2.abs());
        k0 = k1;
        f0 = f1;
        k1 = k2;
        if done {
            break;
        }
        f1 = c2(k1)?;
    }
    Ok(k1)
}

/// Zigzag boundary by the three routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZigzagResult {
    pub eps: f64,
    pub kappa_z_numeric: f64,
    pub kappa_z_spectral: Option<f64>,
    pub kappa_z_series: f64,
}

pub fn kappa_z_root(eps: f64, source: A1Source, spectral: Option<&SpectralFitOptions>) -> Result<ZigzagResult, ExpansionError> {
    Ok(ZigzagResult {
        eps,
        kappa_z_numeric: kappa_z_closed_root(eps, source)?,
        kappa_z_spectral: spectral.map(|o| kappa_z_spectral(eps, o)).transpose()?,
        kappa_z_series: kappa_z_series(eps),
    })
}
