//! Even, 2π-periodic roll solutions `u_p(ξ) = Σ a_n cos(nξ)` (odd `n`) of the
//! stationary Swift–Hohenberg equation in the stretched variable `ξ = k x`:
//!
//! `0 = -(1 + (1+κ) ∂ξ²)² u + ε² u - u³`.
//!
//! Solved by Fourier–Galerkin Newton iteration on the odd cosine harmonics,
//! with the cubic projected by an exact collocation rule.

use crate::params::Params;
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;
use thiserror::Error;

/// Default highest admissible harmonic.
pub const DEFAULT_N_MODES: usize = 32;
/// Default tolerance on the Galerkin residual.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Relative tail size that triggers automatic doubling of `n_modes`.
pub const TAIL_TOL: f64 = 1e-12;
const MAX_N_MODES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RollError {
    #[error("Newton iteration did not converge (residual {residual:.3e} after {iterations} iterations)")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("roll amplitude vanishes at eps = {eps}, kappa = {kappa}")]
    DegenerateSolution { eps: f64, kappa: f64 },
    #[error("truncation n_modes = {n_modes} too small: {reason}")]
    TruncationTooSmall { n_modes: usize, reason: String },
}

/// Converged roll with its cosine coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RollSolution {
    pub params: Params,
    /// Highest admissible harmonic index.
    pub n_modes: usize,
    /// `coeffs[i]` multiplies `cos((2i+1) ξ)`.
    pub coeffs: Vec<f64>,
    /// Sup of the Galerkin residual over the retained modes.
    pub residual_inf: f64,
    pub a_tilde: f64,
    pub iterations: usize,
}

impl RollSolution {
    /// Wraps given coefficients (no solve). Useful for synthetic profiles.
    pub fn from_coefficients(params: Params, coeffs: Vec<f64>) -> Self {
        let n_modes = (2 * coeffs.len()).saturating_sub(1);
        let mut roll = Self {
            params,
            n_modes,
            coeffs,
            residual_inf: 0.0,
            a_tilde: params.a_tilde(),
            iterations: 0,
        };
        roll.residual_inf = galerkin_residual(&roll);
        roll
    }

    pub fn harmonics(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coeffs.iter().enumerate().map(|(i, &a)| (2 * i + 1, a))
    }

    /// Coefficient of `cos(n ξ)`; zero for even or unretained `n`.
    pub fn coeff(&self, n: usize) -> f64 {
        if n % 2 == 0 {
            return 0.0;
        }
        self.coeffs.get(n / 2).copied().unwrap_or(0.0)
    }

    pub fn a1(&self) -> f64 {
        self.coeff(1)
    }

    pub fn a3(&self) -> f64 {
        self.coeff(3)
    }

    /// Highest harmonic actually carried.
    pub fn highest_harmonic(&self) -> usize {
        (2 * self.coeffs.len()).saturating_sub(1)
    }

    /// Complex-exponential coefficient `û_m` (so `u_p = Σ û_m e^{imξ}`).
    pub fn fourier_coeff(&self, m: i64) -> f64 {
        0.5 * self.coeff(m.unsigned_abs() as usize)
    }

    /// Exponential coefficients of `u_p²` for `m = -2h..=2h`, index `m + 2h`.
    pub fn squared_fourier(&self) -> Vec<f64> {
        let h = self.highest_harmonic() as i64;
        let mut w = vec![0.0; (4 * h + 1).max(1) as usize];
        for p in (-h..=h).filter(|p| p % 2 != 0) {
            let up = self.fourier_coeff(p);
            for q in (-h..=h).filter(|q| q % 2 != 0) {
                w[(p + q + 2 * h) as usize] += up * self.fourier_coeff(q);
            }
        }
        w
    }

    pub fn eval(&self, xi: f64) -> f64 {
        self.harmonics().map(|(n, a)| a * (n as f64 * xi).cos()).sum()
    }

    pub fn eval_derivative(&self, xi: f64) -> f64 {
        self.harmonics()
            .map(|(n, a)| -(n as f64) * a * (n as f64 * xi).sin())
            .sum()
    }
}

/// Symbol of the linear operator on `cos(n ξ)`.
pub fn linear_symbol(params: &Params, n: f64) -> f64 {
    let g = 1.0 - (1.0 + params.kappa) * n * n;
    -g * g + params.eps * params.eps
}

/// Two-term small-amplitude reference `(a1, a3)`.
pub fn roll_series_reference(eps: f64, kappa: f64) -> (f64, f64) {
    let at = crate::params::a_tilde(eps, kappa);
    let at3 = at * at * at;
    (at + at3 / 512.0, -at3 / 256.0)
}

/// Configurable roll solver.
#[derive(Debug, Clone)]
pub struct RollSolver {
    pub n_modes: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Double `n_modes` until the retained tail is below `TAIL_TOL * |a1|`.
    pub auto_refine: bool,
}

impl Default for RollSolver {
    fn default() -> Self {
        Self { n_modes: DEFAULT_N_MODES, tol: DEFAULT_TOL, max_iter: 50, auto_refine: true }
    }
}

impl RollSolver {
    pub fn new(n_modes: usize) -> Self {
        Self { n_modes, ..Self::default() }
    }

    pub fn auto_refine(mut self, on: bool) -> Self {
        self.auto_refine = on;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn solve(&self, params: Params) -> Result<RollSolution, RollError> {
        if self.n_modes == 0 {
            return Err(RollError::TruncationTooSmall {
                n_modes: 0,
                reason: "no odd harmonic retained".into(),
            });
        }
        let at = params.a_tilde();
        if at <= 1e-10 {
            return Err(RollError::DegenerateSolution { eps: params.eps, kappa: params.kappa });
        }
        let mut n_modes = self.n_modes;
        let mut guess: Option<Vec<f64>> = None;
        loop {
            let roll = self.solve_fixed(params, n_modes, guess.as_deref())?;
            let tail = roll.coeffs.last().copied().unwrap_or(0.0).abs();
            if !self.auto_refine || roll.coeffs.len() < 2 || tail < TAIL_TOL * roll.a1().abs() {
                return Ok(roll);
            }
            if n_modes * 2 > MAX_N_MODES {
                return Err(RollError::TruncationTooSmall {
                    n_modes,
                    reason: format!("tail {tail:.3e} still above tolerance"),
                });
            }
            n_modes *= 2;
            guess = Some(roll.coeffs);
        }
    }

    fn solve_fixed(
        &self,
        params: Params,
        n_modes: usize,
        guess: Option<&[f64]>,
    ) -> Result<RollSolution, RollError> {
        let m = n_modes.div_ceil(2);
        let start = |p: &Params| {
            let (a1, a3) = roll_series_reference(p.eps, p.kappa);
            let mut a = vec![0.0; m];
            a[0] = a1;
            if m > 1 {
                a[1] = a3;
            }
            a
        };
        let init = match guess {
            Some(g) => {
                let mut a = vec![0.0; m];
                a[..g.len().min(m)].copy_from_slice(&g[..g.len().min(m)]);
                a
            }
            None => start(&params),
        };
        let direct = newton(&params, init, self.tol, self.max_iter);
        let (coeffs, iterations) = match direct {
            Ok(ok) => ok,
            Err(err) => {
                // continuation in eps^2 from closer to onset
                let mut a: Option<Vec<f64>> = None;
                let mut its = 0;
                let k2 = params.kappa * params.kappa;
                for s in [0.125, 0.25, 0.5, 0.75, 1.0] {
                    let p = Params { eps: (k2 + s * (params.eps.powi(2) - k2)).sqrt(), ..params };
                    let a0 = a.take().unwrap_or_else(|| start(&p));
                    let (sol, it) = newton(&p, a0, self.tol, self.max_iter).map_err(|_| err.clone())?;
                    its += it;
                    a = Some(sol);
                }
                (a.unwrap(), its)
            }
        };
        let at = params.a_tilde();
        if coeffs[0].abs() < 0.5 * at {
            return Err(RollError::DegenerateSolution { eps: params.eps, kappa: params.kappa });
        }
        let mut roll = RollSolution {
            params,
            n_modes,
            coeffs,
            residual_inf: 0.0,
            a_tilde: at,
            iterations,
        };
        // fix the sign convention a1 > 0 (the half-period shift u -> -u)
        if roll.coeffs[0] < 0.0 {
            roll.coeffs.iter_mut().for_each(|c| *c = -*c);
        }
        roll.residual_inf = galerkin_residual(&roll);
        if roll.residual_inf > self.tol {
            return Err(RollError::NoConvergence { residual: roll.residual_inf, iterations });
        }
        Ok(roll)
    }
}

/// Solves for the roll with the default solver settings and `n_modes`.
pub fn solve_roll(params: Params, n_modes: usize) -> Result<RollSolution, RollError> {
    RollSolver::new(n_modes).solve(params)
}

struct Collocation {
    xi: Vec<f64>,
    /// cos table, `cos[q * m + i] = cos((2i+1) xi_q)`
    cos: Vec<f64>,
    m: usize,
}

impl Collocation {
    fn new(m: usize) -> Self {
        let h = 2 * m - 1;
        let q = 8 * (h + 1);
        let xi: Vec<f64> = (0..q).map(|j| 2.0 * PI * j as f64 / q as f64).collect();
        let mut cos = Vec::with_capacity(q * m);
        for &x in &xi {
            for i in 0..m {
                cos.push(((2 * i + 1) as f64 * x).cos());
            }
        }
        Self { xi, cos, m }
    }

    fn field(&self, a: &[f64]) -> Vec<f64> {
        (0..self.xi.len())
            .map(|q| {
                let row = &self.cos[q * self.m..(q + 1) * self.m];
                row.iter().zip(a).map(|(c, a)| c * a).sum()
            })
            .collect()
    }

    /// `(2/Q) Σ_q f(ξ_q) cos(n_i ξ_q)` for every retained harmonic.
    fn project(&self, f: &[f64]) -> Vec<f64> {
        let scale = 2.0 / self.xi.len() as f64;
        let mut out = vec![0.0; self.m];
        for (q, fq) in f.iter().enumerate() {
            let row = &self.cos[q * self.m..(q + 1) * self.m];
            for (o, c) in out.iter_mut().zip(row) {
                *o += fq * c;
            }
        }
        out.iter_mut().for_each(|o| *o *= scale);
        out
    }
}

fn galerkin_map(params: &Params, col: &Collocation, a: &[f64]) -> Vec<f64> {
    let u = col.field(a);
    let cubic: Vec<f64> = u.iter().map(|x| x * x * x).collect();
    let proj = col.project(&cubic);
    a.iter()
        .enumerate()
        .map(|(i, ai)| linear_symbol(params, (2 * i + 1) as f64) * ai - proj[i])
        .collect()
}

fn galerkin_residual(roll: &RollSolution) -> f64 {
    let col = Collocation::new(roll.coeffs.len().max(1));
    galerkin_map(&roll.params, &col, &roll.coeffs)
        .iter()
        .fold(0.0, |m, r| m.max(r.abs()))
}

fn newton(params: &Params, mut a: Vec<f64>, tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize), RollError> {
    let m = a.len();
    let col = Collocation::new(m);
    let nq = col.xi.len();
    let scale = 2.0 / nq as f64;
    let mut last = f64::INFINITY;
    for it in 1..=max_iter {
        let f = galerkin_map(params, &col, &a);
        let res = f.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
        if !res.is_finite() {
            break;
        }
        let u = col.field(&a);
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for q in 0..nq {
            let w = 3.0 * u[q] * u[q] * scale;
            let row = &col.cos[q * m..(q + 1) * m];
            for i in 0..m {
                let wi = w * row[i];
                for k in 0..m {
                    jac[(i, k)] -= wi * row[k];
                }
            }
        }
        for i in 0..m {
            jac[(i, i)] += linear_symbol(params, (2 * i + 1) as f64);
        }
        let Some(step) = jac.lu().solve(&DVector::from_vec(f)) else {
            break;
        };
        let step_norm = step.amax();
        for (ai, s) in a.iter_mut().zip(step.iter()) {
            *ai -= s;
        }
        let scale_a = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        last = res;
        if res <= tol && step_norm <= 1e-14 * scale_a.max(1e-300) {
            return Ok((a, it));
        }
    }
    Err(RollError::NoConvergence { residual: last, iterations: max_iter })
}

/// Pointwise residual `sup_q |-(1+(1+κ)∂²)² u + ε² u - u³|` at `n_quad`
/// equispaced collocation points.
pub fn residual(roll: &RollSolution, n_quad: usize) -> f64 {
    let mut sup = 0.0f64;
    for q in 0..n_quad.max(1) {
        let xi = 2.0 * PI * q as f64 / n_quad.max(1) as f64;
        let mut lin = 0.0;
        let mut u = 0.0;
        for (n, a) in roll.harmonics() {
            let c = (n as f64 * xi).cos();
            lin += linear_symbol(&roll.params, n as f64) * a * c;
            u += a * c;
        }
        sup = sup.max((lin - u * u * u).abs());
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(eps: f64, kappa: f64) -> Params {
        Params::new(eps, kappa).unwrap()
    }

    #[test]
    fn converges_with_tiny_residual() {
        let roll = solve_roll(p(0.2, 0.0), DEFAULT_N_MODES).unwrap();
        assert!(roll.residual_inf < 1e-14, "{}", roll.residual_inf);
        assert!(residual(&roll, 256) < 1e-10);
        assert!(roll.a1() > 0.0);
        assert!(roll.iterations < 10);
    }

    #[test]
    fn series_agreement_is_fourth_order() {
        for eps in [0.05, 0.1, 0.2] {
            let roll = solve_roll(p(eps, 0.0), DEFAULT_N_MODES).unwrap();
            let (a1, a3) = roll_series_reference(eps, 0.0);
            let at4 = roll.a_tilde.powi(4);
            assert!((roll.a1() - a1).abs() <= at4, "eps={eps}");
            assert!((roll.a3() - a3).abs() <= at4, "eps={eps}");
        }
    }

    #[test]
    fn series_reference_values() {
        let (a1, a3) = roll_series_reference(0.2, 0.0);
        let at = 0.230_940_107_675_850_3_f64;
        assert!((a1 - (at + at.powi(3) / 512.0)).abs() < 1e-16);
        assert!((a3 + at.powi(3) / 256.0).abs() < 1e-16);
    }

    #[test]
    fn degenerate_at_band_edge() {
        assert!(matches!(
            solve_roll(p(0.1, 0.1), 32),
            Err(RollError::DegenerateSolution { .. })
        ));
        assert!(matches!(
            solve_roll(p(0.1, 0.0), 0),
            Err(RollError::TruncationTooSmall { .. })
        ));
    }

    #[test]
    fn auto_refinement_grows_small_truncations() {
        let roll = solve_roll(p(0.3, 0.0), 3).unwrap();
        assert!(roll.n_modes > 3);
        let fixed = RollSolver::new(3).auto_refine(false).solve(p(0.3, 0.0)).unwrap();
        assert_eq!(fixed.coeffs.len(), 2);
        assert!(fixed.residual_inf < 1e-14);
        // truncation error shows up only in the pointwise residual
        assert!(residual(&fixed, 64) > 1e-8);
    }

    #[test]
    fn squared_fourier_matches_pointwise_square() {
        let roll = solve_roll(p(0.3, 0.05), 8).unwrap();
        let w = roll.squared_fourier();
        let h = roll.highest_harmonic() as i64;
        for &xi in &[0.0, 0.3, 1.7, 4.0] {
            let direct = roll.eval(xi).powi(2);
            let series: f64 = (-2 * h..=2 * h)
                .map(|m| w[(m + 2 * h) as usize] * (m as f64 * xi).cos())
                .sum();
            assert!((direct - series).abs() < 1e-15);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let roll = solve_roll(p(0.3, 0.0), 16).unwrap();
        let h = 1e-5;
        let fd = (roll.eval(0.7 + h) - roll.eval(0.7 - h)) / (2.0 * h);
        assert!((fd - roll.eval_derivative(0.7)).abs() < 1e-9);
    }
}
