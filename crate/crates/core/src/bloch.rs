//! Bloch-wave operators `L_D(σ)` of the roll linearization, their spectra,
//! and continuation of the critical eigenvalue branch `λ(σ)`.
//!
//! In the Fourier basis `e^{i j ξ}`, `|j| <= J`, the operator has entries
//! `(μ_j(σ) + ε²) δ_jk - 3 w_{j-k}` with `w` the coefficients of `u_p²`.
//! Because `u_p` holds only odd harmonics, `w` is supported on even indices
//! and the matrix splits into an odd-`j` and an even-`j` block; the critical
//! branch lives in the odd block.

use crate::expansions::{mu, mu_gradient, mu_hessian};
use crate::params::{Params, SigmaPoint};
use crate::roll::RollSolution;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

pub const DEFAULT_TRUNCATION: usize = 64;
pub const DEFAULT_SIGMA_MAX: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BlochError {
    #[error("truncation J = {j} too small for roll harmonics up to {highest} (need J >= {need})")]
    TruncationTooSmall { j: usize, highest: usize, need: usize },
    #[error("branch ambiguous at sigma = ({s1}, {s2}): gap {gap:.3e} vs tracking error {err:.3e}")]
    BranchCrossing { s1: f64, s2: f64, gap: f64, err: f64 },
    #[error("eigenvector phase at sigma = 0 cannot be fixed: {0}")]
    PhaseNotFixed(String),
    #[error("grid must contain sigma = 0")]
    MissingOrigin,
    #[error("grid point ({s1}, {s2}) lies outside |sigma| <= {sigma_max}")]
    SigmaOutOfRange { s1: f64, s2: f64, sigma_max: f64 },
    #[error("empty grid")]
    EmptyGrid,
}

/// The operator `L_D(σ)` truncated to `|j| <= J`; row `i` is Fourier index `i - J`.
#[derive(Debug, Clone)]
pub struct BlochOperatorMatrix {
    pub sigma: SigmaPoint,
    pub truncation: usize,
    pub entries: DMatrix<Complex64>,
}

impl BlochOperatorMatrix {
    pub fn dim(&self) -> usize {
        2 * self.truncation + 1
    }

    /// `max |M - M^H|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut d = 0.0f64;
        for i in 0..n {
            for k in 0..n {
                d = d.max((self.entries[(i, k)] - self.entries[(k, i)].conj()).norm());
            }
        }
        d
    }

    /// Full spectrum, sorted descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v = SymmetricEigen::new(self.entries.map(|z| z.re)).eigenvalues.as_slice().to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

fn check_truncation(roll: &RollSolution, j: usize) -> Result<(), BlochError> {
    let highest = roll.highest_harmonic();
    if j < 2 * highest || j == 0 {
        return Err(BlochError::TruncationTooSmall { j, highest, need: (2 * highest).max(1) });
    }
    Ok(())
}

/// Assembles `L_D(σ)` for the roll `roll` at truncation `J`.
pub fn assemble_operator(
    roll: &RollSolution,
    sigma: SigmaPoint,
    j: usize,
) -> Result<BlochOperatorMatrix, BlochError> {
    check_truncation(roll, j)?;
    let real = assemble_real(roll, &roll.squared_fourier(), sigma, j);
    Ok(BlochOperatorMatrix { sigma, truncation: j, entries: real.map(|x| Complex64::new(x, 0.0)) })
}

fn assemble_real(roll: &RollSolution, w: &[f64], sigma: SigmaPoint, j: usize) -> DMatrix<f64> {
    let n = 2 * j + 1;
    let ji = j as i64;
    let h2 = (w.len() as i64 - 1) / 2;
    let eps2 = roll.params.eps * roll.params.eps;
    DMatrix::from_fn(n, n, |r, c| {
        let (jr, jc) = (r as i64 - ji, c as i64 - ji);
        let m = jr - jc;
        let pot = if m.abs() <= h2 { -3.0 * w[(m + h2) as usize] } else { 0.0 };
        if r == c { mu(jr, roll.params.kappa, sigma) + eps2 + pot } else { pot }
    })
}

/// Eigen-decomposition of one parity block.
struct Block {
    /// Fourier indices carried by the block.
    idx: Vec<i64>,
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
    mat: DMatrix<f64>,
}

struct PointSpectrum {
    odd: Block,
    even: Block,
}

impl PointSpectrum {
    fn compute(roll: &RollSolution, w: &[f64], sigma: SigmaPoint, j: usize) -> Self {
        let full = assemble_real(roll, w, sigma, j);
        let ji = j as i64;
        let mk = |parity: i64| {
            let idx: Vec<i64> = (-ji..=ji).filter(|k| k.rem_euclid(2) == parity).collect();
            let rows: Vec<usize> = idx.iter().map(|k| (k + ji) as usize).collect();
            let mat = DMatrix::from_fn(rows.len(), rows.len(), |a, b| full[(rows[a], rows[b])]);
            let eig = SymmetricEigen::new(mat.clone());
            Block { idx, eig, mat }
        };
        Self { odd: mk(1), even: mk(0) }
    }

    /// All eigenvalues tagged with (is_odd, position in block).
    fn tagged(&self) -> Vec<(f64, bool, usize)> {
        let mut out: Vec<(f64, bool, usize)> = Vec::new();
        for (k, &l) in self.odd.eig.eigenvalues.iter().enumerate() {
            out.push((l, true, k));
        }
        for (k, &l) in self.even.eig.eigenvalues.iter().enumerate() {
            out.push((l, false, k));
        }
        out.sort_by(|a, b| b.0.total_cmp(&a.0));
        out
    }
}

/// Shifted inverse iteration + Rayleigh quotient on a real symmetric block.
fn refine(mat: &DMatrix<f64>, lambda: f64, v: &DVector<f64>) -> (f64, DVector<f64>) {
    let n = mat.nrows();
    let shift = lambda + 1e-10 * lambda.abs().max(1.0);
    let lu = (mat - DMatrix::<f64>::identity(n, n) * shift).lu();
    let mut x = v.clone();
    for _ in 0..3 {
        match lu.solve(&x) {
            Some(y) if y.iter().all(|c| c.is_finite()) && y.norm() > 0.0 => {
                x = &y / y.norm();
            }
            _ => break,
        }
    }
    if x.dot(v) < 0.0 {
        x = -x;
    }
    let rq = x.dot(&(mat * &x));
    (rq, x)
}

/// Gradient and Hessian of the selected eigenvalue by perturbation theory
/// (`∂M/∂σ` is diagonal).
fn derivatives(block: &Block, kappa: f64, sigma: SigmaPoint, sel: usize, lambda: f64, v: &DVector<f64>) -> ([f64; 2], [f64; 3]) {
    let grads: Vec<[f64; 2]> = block.idx.iter().map(|&j| mu_gradient(j, kappa, sigma)).collect();
    let hess: Vec<[f64; 3]> = block.idx.iter().map(|&j| mu_hessian(j, kappa, sigma)).collect();
    let mut g = [0.0; 2];
    let mut h = [0.0; 3];
    for (i, vi) in v.iter().enumerate() {
        let w = vi * vi;
        g[0] += w * grads[i][0];
        g[1] += w * grads[i][1];
        for a in 0..3 {
            h[a] += w * hess[i][a];
        }
    }
    let vals = &block.eig.eigenvalues;
    for k in 0..vals.len() {
        if k == sel {
            continue;
        }
        let denom = lambda - vals[k];
        if denom.abs() < 1e-12 {
            continue;
        }
        let vk = block.eig.eigenvectors.column(k);
        let (mut p1, mut p2) = (0.0, 0.0);
        for i in 0..v.len() {
            p1 += vk[i] * grads[i][0] * v[i];
            p2 += vk[i] * grads[i][1] * v[i];
        }
        h[0] += 2.0 * p1 * p1 / denom;
        h[1] += 2.0 * p1 * p2 / denom;
        h[2] += 2.0 * p2 * p2 / denom;
    }
    (g, h)
}

/// Options for branch continuation.
#[derive(Debug, Clone)]
pub struct BranchOptions {
    pub sigma_max: f64,
    /// Required ratio of spectral gap to predictor error.
    pub crossing_factor: f64,
}

impl Default for BranchOptions {
    fn default() -> Self {
        Self { sigma_max: DEFAULT_SIGMA_MAX, crossing_factor: 10.0 }
    }
}

/// Critical eigenvalue branch sampled on a grid.
#[derive(Debug, Clone)]
pub struct EigenBranch {
    pub params: Params,
    pub truncation: usize,
    pub grid: Vec<SigmaPoint>,
    pub lambdas: Vec<f64>,
    /// `ℓ²`-normalized eigenvectors, entry `i` is Fourier index `i - J`.
    pub eigvecs: Vec<DVector<Complex64>>,
    /// Largest non-branch eigenvalue at each grid point.
    pub second: Vec<f64>,
    /// `λ0 = max` of `second` over the grid.
    pub spectral_gap: f64,
}

impl EigenBranch {
    pub fn index_of(&self, sigma: SigmaPoint, tol: f64) -> Option<usize> {
        self.grid.iter().position(|s| s.dist(&sigma) <= tol)
    }

    pub fn lambda_at(&self, sigma: SigmaPoint) -> Option<f64> {
        self.index_of(sigma, 1e-14).map(|i| self.lambdas[i])
    }
}

fn alignment_reference(roll: &RollSolution, idx: &[i64]) -> Vec<f64> {
    // Fourier coefficients of u_p' divided by i
    idx.iter().map(|&j| j as f64 * roll.fourier_coeff(j)).collect()
}

/// Critical branch with default options.
pub fn critical_branch(roll: &RollSolution, grid: &[SigmaPoint], j: usize) -> Result<EigenBranch, BlochError> {
    critical_branch_with(roll, grid, j, &BranchOptions::default())
}

/// Tracks the eigenvalue through `0` at `σ = 0` over `grid`.
///
/// Points are visited by increasing `|σ|`; each is continued from its nearest
/// already-visited neighbour with a second-order Taylor predictor, and the
/// eigenvalue nearest the prediction is selected. Eigenvectors carry the
/// gauge `e = i v`, `v` real, with `v` aligned to `u_p'` at the origin and to
/// the neighbour elsewhere.
pub fn critical_branch_with(
    roll: &RollSolution,
    grid: &[SigmaPoint],
    j: usize,
    opts: &BranchOptions,
) -> Result<EigenBranch, BlochError> {
    check_truncation(roll, j)?;
    if grid.is_empty() {
        return Err(BlochError::EmptyGrid);
    }
    for s in grid {
        if s.norm() > opts.sigma_max + 1e-12 || s.sigma1.abs() > 0.5 {
            return Err(BlochError::SigmaOutOfRange { s1: s.sigma1, s2: s.sigma2, sigma_max: opts.sigma_max });
        }
    }
    let origin = grid.iter().position(|s| s.norm() == 0.0).ok_or(BlochError::MissingOrigin)?;
    let w = roll.squared_fourier();
    let kappa = roll.params.kappa;
    let n = grid.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| grid[a].norm().total_cmp(&grid[b].norm()));
    // make sure the origin is first even if duplicated
    if let Some(pos) = order.iter().position(|&i| i == origin) {
        order.swap(0, pos);
    }

    let mut lambdas = vec![f64::NAN; n];
    let mut second = vec![f64::NAN; n];
    let mut vecs: Vec<Option<DVector<f64>>> = vec![None; n];
    let mut odd_flags = vec![true; n];
    let mut derivs: Vec<([f64; 2], [f64; 3])> = vec![([0.0; 2], [0.0; 3]); n];
    let mut done: Vec<usize> = Vec::with_capacity(n);

    for &idx in &order {
        let sigma = grid[idx];
        let anchor = done
            .iter()
            .copied()
            .min_by(|&a, &b| grid[a].dist(&sigma).total_cmp(&grid[b].dist(&sigma)));
        let pred = match anchor {
            None => 0.0,
            Some(a) => {
                let d = sigma.sub(&grid[a]);
                let (g, h) = derivs[a];
                lambdas[a]
                    + g[0] * d.sigma1
                    + g[1] * d.sigma2
                    + 0.5 * (h[0] * d.sigma1 * d.sigma1 + 2.0 * h[1] * d.sigma1 * d.sigma2 + h[2] * d.sigma2 * d.sigma2)
            }
        };
        let spec = PointSpectrum::compute(roll, &w, sigma, j);
        let tagged = spec.tagged();
        let (sel_pos, &(lam_raw, is_odd, k)) = tagged
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 .0 - pred).abs().total_cmp(&(b.1 .0 - pred).abs()))
            .expect("non-empty spectrum");
        let err = (lam_raw - pred).abs();
        let gap = tagged
            .iter()
            .enumerate()
            .filter(|(p, _)| *p != sel_pos)
            .map(|(_, t)| (t.0 - lam_raw).abs())
            .fold(f64::INFINITY, f64::min);
        if gap < opts.crossing_factor * err {
            return Err(BlochError::BranchCrossing { s1: sigma.sigma1, s2: sigma.sigma2, gap, err });
        }
        let block = if is_odd { &spec.odd } else { &spec.even };
        let raw = block.eig.eigenvectors.column(k).into_owned();
        let (lam, mut v) = refine(&block.mat, lam_raw, &raw);
        let sign_ref = match anchor {
            None => {
                let r = alignment_reference(roll, &block.idx);
                let ov: f64 = r.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                if rn == 0.0 || ov.abs() < 1e-8 * rn {
                    return Err(BlochError::PhaseNotFixed("eigenvector orthogonal to u_p'".into()));
                }
                ov
            }
            Some(a) => {
                if odd_flags[a] != is_odd {
                    return Err(BlochError::BranchCrossing { s1: sigma.sigma1, s2: sigma.sigma2, gap, err });
                }
                vecs[a].as_ref().unwrap().dot(&v)
            }
        };
        if sign_ref < 0.0 {
            v = -v;
        }
        derivs[idx] = derivatives(block, kappa, sigma, k, lam, &v);
        lambdas[idx] = lam;
        second[idx] = tagged
            .iter()
            .enumerate()
            .filter(|(p, _)| *p != sel_pos)
            .map(|(_, t)| t.0)
            .fold(f64::NEG_INFINITY, f64::max);
        odd_flags[idx] = is_odd;
        vecs[idx] = Some(v);
        done.push(idx);
    }

    let dim = 2 * j + 1;
    let ji = j as i64;
    let eigvecs = (0..n)
        .map(|i| {
            let v = vecs[i].as_ref().unwrap();
            let parity = if odd_flags[i] { 1 } else { 0 };
            let mut e = DVector::<Complex64>::zeros(dim);
            let mut b = 0;
            for jj in -ji..=ji {
                if jj.rem_euclid(2) == parity {
                    e[(jj + ji) as usize] = Complex64::new(0.0, v[b]);
                    b += 1;
                }
            }
            e
        })
        .collect();
    let spectral_gap = second.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(EigenBranch { params: roll.params, truncation: j, grid: grid.to_vec(), lambdas, eigvecs, second, spectral_gap })
}

/// `λ0 = max_σ` of the second-largest eigenvalue of `L_D(σ)` over `grid`.
pub fn spectral_gap(roll: &RollSolution, grid: &[SigmaPoint], j: usize) -> Result<f64, BlochError> {
    check_truncation(roll, j)?;
    if grid.is_empty() {
        return Err(BlochError::EmptyGrid);
    }
    let w = roll.squared_fourier();
    Ok(grid
        .iter()
        .map(|&s| PointSpectrum::compute(roll, &w, s, j).tagged()[1].0)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Parity diagnostics of one eigenvector on the `σ2 = 0` line.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityPoint {
    pub sigma: SigmaPoint,
    /// `ℓ²` norm of the even part of `Re e`.
    pub even_part_of_real: f64,
    /// `ℓ²` norm of the odd part of `Im e`.
    pub odd_part_of_imag: f64,
    /// `ℓ²` norm of `Im e`.
    pub imag_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityReport {
    pub points: Vec<ParityPoint>,
    pub max_even_part_of_real: f64,
    pub max_odd_part_of_imag: f64,
}

/// Parity of `e(σ1, 0; ξ) = Σ e_j e^{ijξ}` on the grid's `σ2 = 0` points.
/// Norms are `ℓ²` norms of Fourier coefficients (`L²(0,2π)` up to `sqrt(2π)`).
pub fn parity_check(branch: &EigenBranch) -> Result<ParityReport, BlochError> {
    let ji = branch.truncation as i64;
    let mut points = Vec::new();
    for (s, e) in branch.grid.iter().zip(&branch.eigvecs) {
        if s.sigma2 != 0.0 {
            continue;
        }
        let c = |m: i64| if m.abs() <= ji { e[(m + ji) as usize] } else { Complex64::new(0.0, 0.0) };
        let (mut ev_re, mut od_im, mut im) = (0.0, 0.0, 0.0);
        for m in -ji..=ji {
            // Re f has coefficients (c_m + conj c_{-m})/2, Im f has (c_m - conj c_{-m})/(2i)
            let re_m = (c(m) + c(-m).conj()) * 0.5;
            let re_mm = (c(-m) + c(m).conj()) * 0.5;
            let im_m = (c(m) - c(-m).conj()) * Complex64::new(0.0, -0.5);
            let im_mm = (c(-m) - c(m).conj()) * Complex64::new(0.0, -0.5);
            ev_re += ((re_m + re_mm) * 0.5).norm_sqr();
            od_im += ((im_m - im_mm) * 0.5).norm_sqr();
            im += im_m.norm_sqr();
        }
        let p = ParityPoint {
            sigma: *s,
            even_part_of_real: ev_re.sqrt(),
            odd_part_of_imag: od_im.sqrt(),
            imag_norm: im.sqrt(),
        };
        if s.sigma1 == 0.0 && p.imag_norm > 1e-10 {
            return Err(BlochError::PhaseNotFixed(format!("|Im e| = {:.3e} at sigma = 0", p.imag_norm)));
        }
        points.push(p);
    }
    let max_even_part_of_real = points.iter().map(|p| p.even_part_of_real).fold(0.0, f64::max);
    let max_odd_part_of_imag = points.iter().map(|p| p.odd_part_of_imag).fold(0.0, f64::max);
    Ok(ParityReport { points, max_even_part_of_real, max_odd_part_of_imag })
}

/// Overlap `|<e, d>| / (|e| |d|)` of a vector with the coefficients of `u_p'`.
pub fn overlap_with_derivative(roll: &RollSolution, e: &DVector<Complex64>, j: usize) -> f64 {
    let ji = j as i64;
    let d: Vec<Complex64> = (-ji..=ji)
        .map(|m| Complex64::new(0.0, m as f64 * roll.fourier_coeff(m)))
        .collect();
    let dot: Complex64 = e.iter().zip(&d).map(|(a, b)| a.conj() * b).sum();
    let dn = d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    dot.norm() / (dn * e.norm())
}
