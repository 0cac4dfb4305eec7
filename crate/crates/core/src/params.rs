//! Model parameters and Bloch-wavenumber points.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default upper bound on the forcing parameter `eps`.
///
/// Existence of the roll family is only known for `eps` below some small
/// threshold; the value is configurable because no sharp threshold is known.
pub const DEFAULT_EPS0: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("eps = {eps} must lie in (0, {eps0})")]
    EpsOutOfRange { eps: f64, eps0: f64 },
    #[error("kappa = {kappa} must satisfy |kappa| <= eps = {eps}")]
    KappaOutOfRange { eps: f64, kappa: f64 },
    #[error("non-finite parameter")]
    NonFinite,
}

/// Forcing `eps` and wavenumber offset `kappa = k^2 - 1` of a roll.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub eps: f64,
    pub kappa: f64,
}

impl Params {
    pub fn new(eps: f64, kappa: f64) -> Result<Self, ParamsError> {
        Self::with_eps0(eps, kappa, DEFAULT_EPS0)
    }

    /// Like [`Params::new`] with a caller-chosen existence bound `eps0`.
    pub fn with_eps0(eps: f64, kappa: f64, eps0: f64) -> Result<Self, ParamsError> {
        if !eps.is_finite() || !kappa.is_finite() || !eps0.is_finite() {
            return Err(ParamsError::NonFinite);
        }
        if eps <= 0.0 || eps > eps0 {
            return Err(ParamsError::EpsOutOfRange { eps, eps0 });
        }
        if kappa.abs() > eps {
            return Err(ParamsError::KappaOutOfRange { eps, kappa });
        }
        Ok(Self { eps, kappa })
    }

    /// Roll wavenumber `k = sqrt(1 + kappa)`.
    pub fn wavenumber(&self) -> f64 {
        (1.0 + self.kappa).sqrt()
    }

    /// Leading-order amplitude `sqrt(4 (eps^2 - kappa^2) / 3)`.
    pub fn a_tilde(&self) -> f64 {
        a_tilde(self.eps, self.kappa)
    }
}

pub fn a_tilde(eps: f64, kappa: f64) -> f64 {
    (4.0 * (eps * eps - kappa * kappa) / 3.0).max(0.0).sqrt()
}

/// A Bloch wavenumber `(sigma1, sigma2)`; `sigma1` is taken in `[-1/2, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SigmaPoint {
    pub sigma1: f64,
    pub sigma2: f64,
}

impl SigmaPoint {
    pub const ORIGIN: SigmaPoint = SigmaPoint { sigma1: 0.0, sigma2: 0.0 };

    pub const fn new(sigma1: f64, sigma2: f64) -> Self {
        Self { sigma1, sigma2 }
    }

    pub fn norm(&self) -> f64 {
        self.sigma1.hypot(self.sigma2)
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.sigma1, -self.sigma2)
    }

    pub fn sub(&self, other: &SigmaPoint) -> Self {
        Self::new(self.sigma1 - other.sigma1, self.sigma2 - other.sigma2)
    }

    pub fn dist(&self, other: &SigmaPoint) -> f64 {
        self.sub(other).norm()
    }
}

/// Tensor grid `sigma1s x sigma2s`, listed with `sigma2` varying fastest.
pub fn tensor_grid(sigma1s: &[f64], sigma2s: &[f64]) -> Vec<SigmaPoint> {
    sigma1s
        .iter()
        .flat_map(|&s1| sigma2s.iter().map(move |&s2| SigmaPoint::new(s1, s2)))
        .collect()
}

/// `n` equispaced points on `[-r, r]` (`n` odd keeps 0 on the grid).
pub fn symmetric_axis(r: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0];
    }
    let h = 2.0 * r / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let x = -r + h * i as f64;
            // snap the midpoint to an exact zero
            if 2 * i + 1 == n { 0.0 } else { x }
        })
        .collect()
}

/// Grid consisting of the two axes `sigma2 = 0` and `sigma1 = 0` with `n`
/// points each on `[0, r]` (the origin is listed once).
pub fn axes_grid(r: f64, n: usize) -> Vec<SigmaPoint> {
    let mut pts = vec![SigmaPoint::ORIGIN];
    for i in 1..=n {
        let s = r * i as f64 / n as f64;
        pts.push(SigmaPoint::new(s, 0.0));
        pts.push(SigmaPoint::new(0.0, s));
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_enforced() {
        assert!(Params::new(0.1, 0.0).is_ok());
        assert!(Params::new(0.1, 0.1).is_ok());
        assert!(matches!(Params::new(0.1, 0.11), Err(ParamsError::KappaOutOfRange { .. })));
        assert!(matches!(Params::new(0.0, 0.0), Err(ParamsError::EpsOutOfRange { .. })));
        assert!(matches!(Params::new(0.6, 0.0), Err(ParamsError::EpsOutOfRange { .. })));
        assert!(Params::with_eps0(0.6, 0.0, 1.0).is_ok());
        assert_eq!(Params::new(f64::NAN, 0.0), Err(ParamsError::NonFinite));
    }

    #[test]
    fn a_tilde_matches_formula() {
        let p = Params::new(0.2, 0.0).unwrap();
        assert!((p.a_tilde() - 0.230_940_107_675_850_3).abs() < 1e-15);
        assert_eq!(a_tilde(0.1, 0.1), 0.0);
    }

    #[test]
    fn symmetric_axis_has_exact_zero() {
        let ax = symmetric_axis(0.25, 11);
        assert_eq!(ax.len(), 11);
        assert_eq!(ax[5], 0.0);
        assert!((ax[0] + 0.25).abs() < 1e-15 && (ax[10] - 0.25).abs() < 1e-15);
        assert_eq!(tensor_grid(&ax, &ax).len(), 121);
        assert_eq!(axes_grid(0.2, 4).len(), 9);
    }
}
