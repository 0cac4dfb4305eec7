//! Bloch splitting of simulated perturbations and the weighted norms
//! `(1+t)^{3/4}|a|_1`, `|a|_∞`, `(1+t)^{5/4}|σ1 a|_1`, `(1+t)^{3/2}|V_s|_1`, `|V_s|_∞`.
//!
//! On the box lattice a perturbation `v̂(m_x, m_y)` with `m_x = j M_x + r`
//! has Bloch coefficients `v̄_j(σ) = v̂(j M_x + r, m_y)` at `σ = (r/M_x, q_y)`.
//! Norms are lattice sums of these discrete coefficients (`|v|_∞ <= |v̄|_1`);
//! sup norms are divided by the lattice cell area to approximate densities.

use super::{Grid, SimError};
use crate::bloch::{critical_branch_with, BranchOptions, EigenBranch};
use crate::kernels::{cutoff, DEFAULT_SIGMA0};
use crate::params::SigmaPoint;
use crate::roll::RollSolution;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Critical branch on the lattice points of a box with `|σ| < σ0`.
#[derive(Debug, Clone)]
pub struct LatticeBranch {
    pub branch: EigenBranch,
    pub sigma0: f64,
    pub periods_x: usize,
    pub ly: f64,
    /// `(r, m_y)` of each branch grid point.
    pub lattice: Vec<(i64, i64)>,
}

impl LatticeBranch {
    pub fn new(roll: &RollSolution, grid: &Grid, sigma0: f64) -> Result<Self, SimError> {
        let m = grid.periods_x as i64;
        let r_lo = -(m / 2);
        let r_hi = (m - 1) / 2;
        let mut pts = Vec::new();
        let mut lattice = Vec::new();
        for r in r_lo..=r_hi {
            for my in -(grid.ky_max as i64)..=grid.ky_max as i64 {
                let s = SigmaPoint::new(r as f64 / m as f64, grid.qy(my));
                if s.norm() < sigma0 {
                    pts.push(s);
                    lattice.push((r, my));
                }
            }
        }
        let j = grid.kx_max.div_ceil(grid.periods_x).max(2 * roll.highest_harmonic());
        let opts = BranchOptions { sigma_max: sigma0, ..BranchOptions::default() };
        let branch = critical_branch_with(roll, &pts, j, &opts)?;
        Ok(Self { branch, sigma0, periods_x: grid.periods_x, ly: grid.ly, lattice })
    }

    pub fn with_default_sigma0(roll: &RollSolution, grid: &Grid) -> Result<Self, SimError> {
        Self::new(roll, grid, DEFAULT_SIGMA0)
    }
}

/// Norms of one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HNorms {
    pub t: f64,
    pub a_l1: f64,
    pub a_inf: f64,
    pub sigma1_a_l1: f64,
    pub vs_l1: f64,
    pub vs_inf: f64,
}

impl HNorms {
    /// `(1+t)^{3/4}|a|_1`, `|a|_∞`, `(1+t)^{5/4}|σ1 a|_1`, `(1+t)^{3/2}|V_s|_1`, `|V_s|_∞`.
    pub fn weighted(&self) -> [f64; 5] {
        let s = 1.0 + self.t;
        [s.powf(0.75) * self.a_l1, self.a_inf, s.powf(1.25) * self.sigma1_a_l1, s.powf(1.5) * self.vs_l1, self.vs_inf]
    }

    /// Sup of the weighted norms.
    pub fn h_norm(&self) -> f64 {
        self.weighted().iter().copied().fold(0.0, f64::max)
    }
}

/// Critical amplitude `a(σ)` of a perturbation at the branch lattice points.
pub fn critical_amplitudes(lb: &LatticeBranch, grid: &Grid, v_hat: &[Complex64]) -> Vec<Complex64> {
    let j = lb.branch.truncation as i64;
    let m = grid.periods_x as i64;
    lb.lattice
        .iter()
        .zip(lb.branch.grid.iter().zip(&lb.branch.eigvecs))
        .map(|(&(r, my), (s, e))| {
            let mut dot = Complex64::default();
            for jj in -j..=j {
                let mx = jj * m + r;
                if grid.retained(mx, my) {
                    dot += e[(jj + j) as usize].conj() * grid.coeff(v_hat, mx, my);
                }
            }
            dot * cutoff(*s, lb.sigma0)
        })
        .collect()
}

fn check_compatible(lb: &LatticeBranch, grid: &Grid) -> Result<(), SimError> {
    if lb.periods_x != grid.periods_x || (lb.ly - grid.ly).abs() > 1e-12 * grid.ly {
        return Err(SimError::BranchMismatch(format!(
            "branch lattice (M_x = {}, L_y = {}) vs box (M_x = {}, L_y = {})",
            lb.periods_x, lb.ly, grid.periods_x, grid.ly
        )));
    }
    if (lb.branch.truncation as i64) * (grid.periods_x as i64) < grid.kx_max as i64 - (grid.periods_x as i64) / 2 {
        return Err(SimError::BranchMismatch(format!(
            "branch truncation J = {} does not cover the retained modes",
            lb.branch.truncation
        )));
    }
    Ok(())
}

/// Splits `v̂` into `a e` and `V_s` and returns its norms at time `t`.
pub fn h_norm_diagnostics(lb: &LatticeBranch, grid: &Grid, v_hat: &[Complex64], t: f64) -> Result<HNorms, SimError> {
    check_compatible(lb, grid)?;
    let cell = (1.0 / grid.periods_x as f64) * (2.0 * std::f64::consts::PI / grid.ly);
    // every retained coefficient, both halves of the spectrum
    let mut total_l1 = 0.0;
    let mut total_inf = 0.0f64;
    let in_branch = |mx: i64, my: i64| -> bool {
        let m = grid.periods_x as i64;
        let r = (mx + m / 2).rem_euclid(m) - m / 2;
        lb.lattice.binary_search(&(r, my)).is_ok()
    };
    for ix in 0..grid.nxh() as i64 {
        for iy in 0..grid.ny {
            let my = grid.my(iy);
            if !grid.retained(ix, my) {
                continue;
            }
            let c = grid.coeff(v_hat, ix, my).norm();
            let mult = if ix == 0 || ix as usize == grid.nx / 2 { 1.0 } else { 2.0 };
            total_l1 += mult * c;
            if !in_branch(ix, my) || !in_branch(-ix, -my) {
                total_inf = total_inf.max(c);
            }
        }
    }
    let amps = critical_amplitudes(lb, grid, v_hat);
    let j = lb.branch.truncation as i64;
    let m = grid.periods_x as i64;
    let (mut a_l1, mut a_inf, mut s1a) = (0.0, 0.0f64, 0.0);
    let mut vs_l1 = total_l1;
    let mut vs_inf = total_inf;
    for (k, &(r, my)) in lb.lattice.iter().enumerate() {
        let a = amps[k];
        let e = &lb.branch.eigvecs[k];
        a_l1 += a.norm();
        a_inf = a_inf.max(a.norm());
        s1a += (lb.branch.grid[k].sigma1 * a).norm();
        for jj in -j..=j {
            let mx = jj * m + r;
            if !grid.retained(mx, my) {
                continue;
            }
            let v = grid.coeff(v_hat, mx, my);
            let vs = v - a * e[(jj + j) as usize];
            vs_l1 += vs.norm() - v.norm();
            vs_inf = vs_inf.max(vs.norm());
        }
    }
    Ok(HNorms {
        t,
        a_l1,
        a_inf: a_inf / cell,
        sigma1_a_l1: s1a,
        vs_l1: vs_l1.max(0.0),
        vs_inf: vs_inf / cell,
    })
}
