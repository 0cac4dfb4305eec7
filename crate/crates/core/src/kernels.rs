//! Critical/stable mode splitting and the quadratic interaction kernel
//! `k1(σ, σ̃) = -3 (2π) ∫_0^{2π} u_p conj(e(σ)) e(σ̃) e(σ-σ̃) dξ`.

use crate::bloch::{critical_branch_with, BlochError, BranchOptions, EigenBranch};
use crate::params::SigmaPoint;
use crate::roll::RollSolution;
use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Branch-isolation radius used for the cutoff `X`.
pub const DEFAULT_SIGMA0: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("sigma = ({0}, {1}) outside the interpolation range")]
    OutOfBranchRange(f64, f64),
    #[error("branch grid is not a full tensor grid with >= 4 points per axis")]
    NotTensorGrid,
    #[error("vector lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no sample with positive bound right-hand side")]
    NoSamples,
    #[error(transparent)]
    Bloch(#[from] BlochError),
}

/// Smooth cutoff: 1 for `|σ| <= σ0/2`, 0 for `|σ| >= σ0`, C∞ in between.
pub fn cutoff(sigma: SigmaPoint, sigma0: f64) -> f64 {
    let r = sigma.norm();
    if r <= 0.5 * sigma0 {
        return 1.0;
    }
    if r >= sigma0 {
        return 0.0;
    }
    let s = (r - 0.5 * sigma0) / (0.5 * sigma0);
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    f(1.0 - s) / (f(1.0 - s) + f(s))
}

/// `v = a e + v_s` with `a = X <e, v>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSplit {
    pub a: Complex64,
    pub v_s: DVector<Complex64>,
}

/// Splits the Bloch coefficients `v` along the unit critical eigenvector.
pub fn split_modes(v: &DVector<Complex64>, eigvec: &DVector<Complex64>, cutoff: f64) -> Result<ModeSplit, KernelError> {
    if v.len() != eigvec.len() {
        return Err(KernelError::LengthMismatch(v.len(), eigvec.len()));
    }
    let a = eigvec.dotc(v) * cutoff;
    let v_s = v - eigvec * a;
    Ok(ModeSplit { a, v_s })
}

/// Source of critical eigenvectors at arbitrary `σ`.
pub trait EigvecSource {
    fn truncation(&self) -> usize;
    fn eigvec(&self, sigma: SigmaPoint) -> Result<DVector<Complex64>, KernelError>;
}

/// Local bicubic (4×4 Lagrange) interpolation of a branch on a tensor grid.
#[derive(Debug, Clone)]
pub struct BranchInterpolant {
    s1: Vec<f64>,
    s2: Vec<f64>,
    /// `(i1 * n2 + i2)` → branch index
    map: Vec<usize>,
    branch: EigenBranch,
}

fn unique_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    v
}

/// Lagrange weights on the 4-node stencil around `x`.
fn stencil(nodes: &[f64], x: f64) -> Option<(usize, [f64; 4])> {
    let n = nodes.len();
    if x < nodes[0] - 1e-13 || x > nodes[n - 1] + 1e-13 {
        return None;
    }
    let i = nodes.partition_point(|&t| t <= x).clamp(1, n - 1) - 1;
    let start = i.saturating_sub(1).min(n - 4);
    let xs = &nodes[start..start + 4];
    let mut w = [0.0; 4];
    for a in 0..4 {
        let mut p = 1.0;
        for b in 0..4 {
            if a != b {
                p *= (x - xs[b]) / (xs[a] - xs[b]);
            }
        }
        w[a] = p;
    }
    Some((start, w))
}

impl BranchInterpolant {
    pub fn new(branch: EigenBranch) -> Result<Self, KernelError> {
        let s1 = unique_sorted(branch.grid.iter().map(|s| s.sigma1).collect());
        let s2 = unique_sorted(branch.grid.iter().map(|s| s.sigma2).collect());
        if s1.len() < 4 || s2.len() < 4 || s1.len() * s2.len() != branch.grid.len() {
            return Err(KernelError::NotTensorGrid);
        }
        let mut map = vec![usize::MAX; s1.len() * s2.len()];
        for (k, s) in branch.grid.iter().enumerate() {
            let i1 = s1.iter().position(|x| (x - s.sigma1).abs() < 1e-13).ok_or(KernelError::NotTensorGrid)?;
            let i2 = s2.iter().position(|x| (x - s.sigma2).abs() < 1e-13).ok_or(KernelError::NotTensorGrid)?;
            map[i1 * s2.len() + i2] = k;
        }
        if map.contains(&usize::MAX) {
            return Err(KernelError::NotTensorGrid);
        }
        Ok(Self { s1, s2, map, branch })
    }

    /// Computes the branch on the tensor grid `[-r, r]²` with `n` points per axis.
    pub fn on_square(roll: &RollSolution, r: f64, n: usize, j: usize) -> Result<Self, KernelError> {
        let ax = crate::params::symmetric_axis(r, n);
        let grid = crate::params::tensor_grid(&ax, &ax);
        let opts = BranchOptions { sigma_max: (2.0f64).sqrt() * r + 1e-12, ..BranchOptions::default() };
        Self::new(critical_branch_with(roll, &grid, j, &opts)?)
    }

    pub fn branch(&self) -> &EigenBranch {
        &self.branch
    }

    fn weights(&self, sigma: SigmaPoint) -> Result<Vec<(usize, f64)>, KernelError> {
        let out = || KernelError::OutOfBranchRange(sigma.sigma1, sigma.sigma2);
        let (a, wa) = stencil(&self.s1, sigma.sigma1).ok_or_else(out)?;
        let (b, wb) = stencil(&self.s2, sigma.sigma2).ok_or_else(out)?;
        let mut w = Vec::with_capacity(16);
        for (p, wp) in wa.iter().enumerate() {
            for (q, wq) in wb.iter().enumerate() {
                w.push((self.map[(a + p) * self.s2.len() + b + q], wp * wq));
            }
        }
        Ok(w)
    }

    pub fn lambda(&self, sigma: SigmaPoint) -> Result<f64, KernelError> {
        Ok(self.weights(sigma)?.iter().map(|(k, w)| w * self.branch.lambdas[*k]).sum())
    }
}

impl EigvecSource for BranchInterpolant {
    fn truncation(&self) -> usize {
        self.branch.truncation
    }

    fn eigvec(&self, sigma: SigmaPoint) -> Result<DVector<Complex64>, KernelError> {
        let w = self.weights(sigma)?;
        let mut e = DVector::<Complex64>::zeros(self.branch.eigvecs[0].len());
        for (k, wk) in w {
            e.axpy(Complex64::new(wk, 0.0), &self.branch.eigvecs[k], Complex64::new(1.0, 0.0));
        }
        let n = e.norm();
        Ok(e / Complex64::new(n, 0.0))
    }
}

/// Eigenvectors by direct continuation from `σ = 0` along the ray to `σ`.
#[derive(Debug, Clone)]
pub struct DirectEigvecs<'a> {
    pub roll: &'a RollSolution,
    pub truncation: usize,
    pub steps: usize,
}

impl EigvecSource for DirectEigvecs<'_> {
    fn truncation(&self) -> usize {
        self.truncation
    }

    fn eigvec(&self, sigma: SigmaPoint) -> Result<DVector<Complex64>, KernelError> {
        let steps = self.steps.max(1);
        let ray: Vec<SigmaPoint> = (0..=steps)
            .map(|i| {
                let f = i as f64 / steps as f64;
                SigmaPoint::new(f * sigma.sigma1, f * sigma.sigma2)
            })
            .collect();
        let opts = BranchOptions { sigma_max: sigma.norm() + 1e-12, ..BranchOptions::default() };
        let br = critical_branch_with(self.roll, &ray, self.truncation, &opts)?;
        Ok(br.eigvecs[steps].clone())
    }
}

/// Values of `Σ_j e_j e^{ijξ}` at `q` equispaced points.
fn synthesize(e: &DVector<Complex64>, j: usize, q: usize) -> Vec<Complex64> {
    let ji = j as i64;
    (0..q)
        .map(|n| {
            let xi = 2.0 * PI * n as f64 / q as f64;
            e.iter()
                .enumerate()
                .filter(|(_, c)| c.norm_sqr() > 0.0)
                .map(|(i, c)| c * Complex64::from_polar(1.0, (i as i64 - ji) as f64 * xi))
                .sum()
        })
        .collect()
}

/// `k1(σ, σ̃)` with eigenvectors from `source`; the `ξ` integral is evaluated
/// exactly by an equispaced rule above the integrand's bandwidth.
pub fn k1_kernel<S: EigvecSource>(
    roll: &RollSolution,
    source: &S,
    sigma: SigmaPoint,
    sigma_tilde: SigmaPoint,
) -> Result<Complex64, KernelError> {
    let j = source.truncation();
    let ea = source.eigvec(sigma)?;
    let eb = source.eigvec(sigma_tilde)?;
    let ec = source.eigvec(sigma.sub(&sigma_tilde))?;
    let q = (2 * (roll.highest_harmonic() + 3 * j + 1)).next_power_of_two();
    let (fa, fb, fc) = (synthesize(&ea, j, q), synthesize(&eb, j, q), synthesize(&ec, j, q));
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..q {
        let xi = 2.0 * PI * n as f64 / q as f64;
        acc += fa[n].conj() * fb[n] * fc[n] * roll.eval(xi);
    }
    Ok(acc * (-3.0 * 2.0 * PI * 2.0 * PI / q as f64))
}

/// `|σ1| + |σ̃1| + |σ1-σ̃1| + |σ1||σ̃1||σ1-σ̃1|`.
pub fn bound_rhs(sigma: SigmaPoint, sigma_tilde: SigmaPoint) -> f64 {
    let (a, b) = (sigma.sigma1.abs(), sigma_tilde.sigma1.abs());
    let c = (sigma.sigma1 - sigma_tilde.sigma1).abs();
    a + b + c + a * b * c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSample {
    pub sigma: SigmaPoint,
    pub sigma_tilde: SigmaPoint,
    pub re_k1: f64,
    pub im_k1: f64,
    pub bound_rhs: f64,
}

impl KernelSample {
    pub fn abs_k1(&self) -> f64 {
        self.re_k1.hypot(self.im_k1)
    }
}

/// Evaluates `k1` on every pair `(σ, σ̃)` of `points × points`.
pub fn sample_k1<S: EigvecSource>(roll: &RollSolution, source: &S, points: &[SigmaPoint]) -> Result<Vec<KernelSample>, KernelError> {
    let mut out = Vec::with_capacity(points.len() * points.len());
    for &s in points {
        for &st in points {
            let k = k1_kernel(roll, source, s, st)?;
            out.push(KernelSample { sigma: s, sigma_tilde: st, re_k1: k.re, im_k1: k.im, bound_rhs: bound_rhs(s, st) });
        }
    }
    Ok(out)
}

/// `C = max |k1| / rhs` over samples with positive right-hand side.
pub fn fit_bound_constant(samples: &[KernelSample]) -> Result<f64, KernelError> {
    samples
        .iter()
        .filter(|s| s.bound_rhs > 0.0)
        .map(|s| s.abs_k1() / s.bound_rhs)
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))))
        .ok_or(KernelError::NoSamples)
}

/// Samples with `|k1| > slack · C · rhs`; zero right-hand sides are skipped.
pub fn bound_violations(samples: &[KernelSample], c: f64, slack: f64) -> usize {
    samples.iter().filter(|s| s.bound_rhs > 0.0 && s.abs_k1() > slack * c * s.bound_rhs).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Params;
    use crate::roll::RollSolver;

    fn small_roll() -> RollSolution {
        RollSolver::new(7).auto_refine(false).solve(Params::new(0.2, 0.0).unwrap()).unwrap()
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(cutoff(SigmaPoint::new(0.1, 0.0), 0.25), 1.0);
        assert_eq!(cutoff(SigmaPoint::new(0.0, 0.25), 0.25), 0.0);
        let mid = cutoff(SigmaPoint::new(0.1875, 0.0), 0.25);
        assert!((mid - 0.5).abs() < 1e-12);
        let mut last = 1.0;
        for i in 0..=100 {
            let c = cutoff(SigmaPoint::new(0.125 + 0.00125 * i as f64, 0.0), 0.25);
            assert!(c <= last + 1e-15);
            last = c;
        }
    }

    #[test]
    fn split_reconstructs_and_is_orthogonal() {
        let e = DVector::from_vec(vec![Complex64::new(0.0, 0.6), Complex64::new(0.0, -0.8), Complex64::new(0.0, 0.0)]);
        let v = DVector::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.1), Complex64::new(3.0, 0.0)]);
        let s = split_modes(&v, &e, 1.0).unwrap();
        assert!((&v - (&e * s.a + &s.v_s)).norm() < 1e-15);
        assert!(e.dotc(&s.v_s).norm() < 1e-15);
        let s0 = split_modes(&v, &e, 0.0).unwrap();
        assert_eq!(s0.a, Complex64::new(0.0, 0.0));
        assert_eq!(s0.v_s, v);
        assert!(split_modes(&v, &DVector::zeros(2), 1.0).is_err());
    }

    #[test]
    fn interpolant_reproduces_nodes_and_rejects_outside() {
        let roll = small_roll();
        let it = BranchInterpolant::on_square(&roll, 0.1, 9, 14).unwrap();
        let s = SigmaPoint::new(0.025, -0.05);
        let k = it.branch().index_of(s, 1e-14).unwrap();
        assert!((it.lambda(s).unwrap() - it.branch().lambdas[k]).abs() < 1e-15);
        assert!((it.eigvec(s).unwrap() - &it.branch().eigvecs[k]).norm() < 1e-13);
        assert!(matches!(it.eigvec(SigmaPoint::new(0.2, 0.0)), Err(KernelError::OutOfBranchRange(..))));
    }

    #[test]
    fn k1_vanishes_on_transverse_slice() {
        let roll = small_roll();
        let it = BranchInterpolant::on_square(&roll, 0.1, 9, 14).unwrap();
        for (a, b) in [(0.03, -0.02), (0.05, 0.05), (-0.04, 0.01)] {
            let k = k1_kernel(&roll, &it, SigmaPoint::new(0.0, a), SigmaPoint::new(0.0, b)).unwrap();
            assert!(k.norm() < 1e-12, "{k}");
        }
    }

    #[test]
    fn bound_rhs_formula() {
        let r = bound_rhs(SigmaPoint::new(0.1, 5.0), SigmaPoint::new(-0.2, 1.0));
        assert!((r - (0.1 + 0.2 + 0.3 + 0.1 * 0.2 * 0.3)).abs() < 1e-15);
    }
}
