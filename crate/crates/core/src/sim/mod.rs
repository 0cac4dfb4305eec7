//! Pseudospectral simulation of `u_t = -(1+Δ)² u + ε² u - u³` on a periodic
//! box of `M_x` roll periods by `L_y`, started near the roll.
//!
//! Time stepping is second-order exponential time differencing (ETDRK2):
//! the linear symbol is integrated exactly and the cubic explicitly, so roll
//! solutions of the discrete Galerkin system are exact fixed points.
//! Products are dealiased with the 2/3 rule.

pub mod checkpoint;
pub mod diagnostics;
pub mod experiment;
pub mod fft2;

use crate::expansions::ExpansionError;
use crate::params::{Params, ParamsError};
use crate::roll::{RollError, RollSolution, RollSolver};
use fft2::Fft2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub use diagnostics::{h_norm_diagnostics, HNorms, LatticeBranch};
pub use experiment::{run_decay_experiment, run_simulation, DecayReport, KappaChoice, Perturbation, Record, SimConfig, SimRun};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("blow-up at t = {t}: |u|_inf = {norm:.3e} exceeds 10x the initial {initial:.3e}")]
    BlowUp { t: f64, norm: f64, initial: f64 },
    #[error("no power-law window found in the decay record")]
    WindowNotFound,
    #[error("snapshot and branch grids differ: {0}")]
    BranchMismatch(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Roll(#[from] RollError),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Bloch(#[from] crate::bloch::BlochError),
    #[error(transparent)]
    Fit(#[from] crate::fit::FitError),
}

/// Which vector field is advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamics {
    /// The full equation for `u`.
    Full,
    /// Linear part only (no cubic).
    Linear,
    /// Linearization about the roll, for the perturbation `v`.
    Linearized,
}

/// Periodic box: `M_x` roll periods (length `2π M_x / k`) by `L_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub periods_x: usize,
    pub lx: f64,
    pub ly: f64,
    /// Largest retained `|m_x|`, `|m_y|` (2/3 rule).
    pub kx_max: usize,
    pub ky_max: usize,
}

impl Grid {
    pub fn new(params: &Params, periods_x: usize, ly: f64, nx: usize, ny: usize) -> Result<Self, SimError> {
        let pow2 = |n: usize| n >= 1 && n.is_power_of_two();
        if !pow2(nx) || nx < 4 || !pow2(ny) {
            return Err(SimError::InvalidConfig(format!("nx = {nx}, ny = {ny} must be powers of two (nx >= 4)")));
        }
        if periods_x == 0 || !(ly > 0.0) {
            return Err(SimError::InvalidConfig("box dimensions must be positive".into()));
        }
        Ok(Self {
            nx,
            ny,
            periods_x,
            lx: 2.0 * PI * periods_x as f64 / params.wavenumber(),
            ly,
            kx_max: nx / 3,
            ky_max: ny / 3,
        })
    }

    pub fn nxh(&self) -> usize {
        self.nx / 2 + 1
    }

    /// Signed y-index of storage row `iy`.
    pub fn my(&self, iy: usize) -> i64 {
        if iy < self.ny.div_ceil(2) { iy as i64 } else { iy as i64 - self.ny as i64 }
    }

    pub fn qx(&self, mx: i64) -> f64 {
        2.0 * PI * mx as f64 / self.lx
    }

    pub fn qy(&self, my: i64) -> f64 {
        2.0 * PI * my as f64 / self.ly
    }

    pub fn retained(&self, mx: i64, my: i64) -> bool {
        mx.unsigned_abs() as usize <= self.kx_max && my.unsigned_abs() as usize <= self.ky_max
    }

    /// Storage index of `(m_x, m_y)` and whether it is the conjugate entry.
    pub fn index(&self, mx: i64, my: i64) -> Option<(usize, bool)> {
        if mx.unsigned_abs() as usize > self.nx / 2 || my.unsigned_abs() as usize > self.ny / 2 {
            return None;
        }
        let (mx, my, conj) = if mx < 0 { (-mx, -my, true) } else { (mx, my, false) };
        let iy = my.rem_euclid(self.ny as i64) as usize;
        Some((mx as usize * self.ny + iy, conj))
    }

    /// Coefficient `û(m_x, m_y)` of a stored spectrum (zero when not stored).
    pub fn coeff(&self, spec: &[Complex64], mx: i64, my: i64) -> Complex64 {
        match self.index(mx, my) {
            Some((i, false)) => spec[i],
            Some((i, true)) => spec[i].conj(),
            None => Complex64::default(),
        }
    }

    /// Sets `û(m_x, m_y)` and keeps the stored half Hermitian-consistent.
    pub fn set_coeff(&self, spec: &mut [Complex64], mx: i64, my: i64, value: Complex64) {
        if let Some((i, conj)) = self.index(mx, my) {
            spec[i] = if conj { value.conj() } else { value };
            // self-conjugate row m_x = 0: also set (0, -m_y)
            if mx == 0 {
                if let Some((k, _)) = self.index(0, -my) {
                    spec[k] = if my == 0 { Complex64::new(value.re, 0.0) } else { value.conj() };
                }
            }
        }
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.lx * ix as f64 / self.nx as f64
    }

    pub fn y(&self, iy: usize) -> f64 {
        self.ly * iy as f64 / self.ny as f64
    }
}

/// `(e^z - 1)/z` and `(e^z - 1 - z)/z²`.
fn phi12(z: f64) -> (f64, f64) {
    if z.abs() < 1e-1 {
        // Taylor series, 9 terms
        let (mut p1, mut p2) = (0.0, 0.0);
        let mut term = 1.0; // z^k / (k+1)!
        let mut fact2 = 0.5; // z^k / (k+2)!
        for k in 0..12 {
            p1 += term;
            p2 += fact2;
            term *= z / (k as f64 + 2.0);
            fact2 *= z / (k as f64 + 3.0);
        }
        (p1, p2)
    } else {
        let em1 = z.exp_m1();
        (em1 / z, (em1 - z) / (z * z))
    }
}

/// Evolving field with its time.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: u64,
    /// Spectrum in [`Grid`] storage order.
    pub u_hat: Vec<Complex64>,
}

/// ETDRK2 pseudospectral stepper.
pub struct Simulator {
    pub grid: Grid,
    pub params: Params,
    pub roll: RollSolution,
    pub dynamics: Dynamics,
    pub dt: f64,
    fft: Fft2,
    mask: Vec<bool>,
    lin: Vec<f64>,
    e1: Vec<f64>,
    hphi1: Vec<f64>,
    hphi2: Vec<f64>,
    roll_hat: Vec<Complex64>,
    /// `-3 u_p²` on the physical grid (linearized dynamics).
    potential: Vec<f64>,
    phys: Vec<f64>,
    n0: Vec<Complex64>,
    n1: Vec<Complex64>,
    stage: Vec<Complex64>,
    /// Sup of the evolved field at the last nonlinear evaluation.
    pub last_sup: f64,
    /// Largest non-Hermitian residue met by an inverse transform.
    pub max_imag_residue: f64,
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator").field("grid", &self.grid).field("params", &self.params).field("dt", &self.dt).finish()
    }
}

impl Simulator {
    /// Builds the stepper. The roll is solved in the simulator's own
    /// harmonic space (odd `n` with `n M_x <= kx_max`) so that it is a
    /// discrete steady state.
    pub fn new(params: Params, grid: Grid, dt: f64, dynamics: Dynamics) -> Result<Self, SimError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidConfig(format!("dt = {dt} must be positive")));
        }
        let n_modes = grid.kx_max / grid.periods_x;
        if n_modes == 0 {
            return Err(SimError::InvalidConfig(format!(
                "nx = {} resolves no roll harmonic over {} periods",
                grid.nx, grid.periods_x
            )));
        }
        let roll = RollSolver::new(n_modes).auto_refine(false).solve(params)?;
        let fft = Fft2::new(grid.nx, grid.ny);
        let len = fft.spectral_len();
        let (mut mask, mut lin) = (vec![false; len], vec![0.0; len]);
        let eps2 = params.eps * params.eps;
        for ix in 0..grid.nxh() {
            for iy in 0..grid.ny {
                let my = grid.my(iy);
                let i = ix * grid.ny + iy;
                mask[i] = grid.retained(ix as i64, my);
                let q2 = grid.qx(ix as i64).powi(2) + grid.qy(my).powi(2);
                lin[i] = -(1.0 - q2).powi(2) + eps2;
            }
        }
        let mut roll_hat = vec![Complex64::default(); len];
        for (n, a) in roll.harmonics() {
            grid.set_coeff(&mut roll_hat, (n * grid.periods_x) as i64, 0, Complex64::new(0.5 * a, 0.0));
        }
        let mut sim = Self {
            grid: grid.clone(),
            params,
            roll,
            dynamics,
            dt,
            fft,
            mask,
            lin,
            e1: Vec::new(),
            hphi1: Vec::new(),
            hphi2: Vec::new(),
            roll_hat,
            potential: Vec::new(),
            phys: vec![0.0; grid.nx * grid.ny],
            n0: vec![Complex64::default(); len],
            n1: vec![Complex64::default(); len],
            stage: vec![Complex64::default(); len],
            last_sup: 0.0,
            max_imag_residue: 0.0,
        };
        sim.set_dt(dt);
        if dynamics == Dynamics::Linearized {
            let rh = sim.roll_hat.clone();
            let mut up = vec![0.0; grid.nx * grid.ny];
            sim.fft.inverse(&rh, &mut up);
            sim.potential = up.iter().map(|u| -3.0 * u * u).collect();
        }
        Ok(sim)
    }

    pub fn set_dt(&mut self, dt: f64) {
        self.dt = dt;
        self.e1 = self.lin.iter().map(|l| (l * dt).exp()).collect();
        let phis: Vec<(f64, f64)> = self.lin.iter().map(|l| phi12(l * dt)).collect();
        self.hphi1 = phis.iter().map(|p| dt * p.0).collect();
        self.hphi2 = phis.iter().map(|p| dt * p.1).collect();
    }

    /// Spectrum of the roll on this grid.
    pub fn roll_spectrum(&self) -> &[Complex64] {
        &self.roll_hat
    }

    pub fn spectral_len(&self) -> usize {
        self.mask.len()
    }

    /// Physical values of a spectrum; returns the non-Hermitian residue.
    pub fn to_physical(&mut self, spec: &[Complex64], out: &mut [f64]) -> f64 {
        let r = self.fft.inverse(spec, out);
        self.max_imag_residue = self.max_imag_residue.max(r);
        r
    }

    /// Dealiased spectrum of a physical field.
    pub fn to_spectral(&mut self, phys: &[f64], out: &mut [Complex64]) {
        self.fft.forward(phys, out);
        for (o, m) in out.iter_mut().zip(&self.mask) {
            if !m {
                *o = Complex64::default();
            }
        }
    }

    /// `sup |field|` of a spectrum on the physical grid.
    pub fn sup_norm(&mut self, spec: &[Complex64]) -> f64 {
        let mut buf = std::mem::take(&mut self.phys);
        self.to_physical(spec, &mut buf);
        let s = buf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.phys = buf;
        s
    }

    fn nonlinear(&mut self, spec: &[Complex64], out: &mut [Complex64]) {
        if self.dynamics == Dynamics::Linear {
            out.iter_mut().for_each(|o| *o = Complex64::default());
            return;
        }
        let mut buf = std::mem::take(&mut self.phys);
        let r = self.fft.inverse(spec, &mut buf);
        self.max_imag_residue = self.max_imag_residue.max(r);
        let mut sup = 0.0f64;
        match self.dynamics {
            Dynamics::Full => {
                for u in buf.iter_mut() {
                    sup = sup.max(u.abs());
                    *u = -*u * *u * *u;
                }
            }
            _ => {
                for (u, p) in buf.iter_mut().zip(&self.potential) {
                    sup = sup.max(u.abs());
                    *u *= p;
                }
            }
        }
        self.last_sup = sup;
        self.fft.forward(&buf, out);
        for (o, m) in out.iter_mut().zip(&self.mask) {
            if !m {
                *o = Complex64::default();
            }
        }
        self.phys = buf;
    }

    /// One ETDRK2 step.
    pub fn step(&mut self, state: &mut SimState) {
        let mut n0 = std::mem::take(&mut self.n0);
        let mut n1 = std::mem::take(&mut self.n1);
        let mut a = std::mem::take(&mut self.stage);
        self.nonlinear(&state.u_hat, &mut n0);
        for i in 0..a.len() {
            a[i] = if self.mask[i] { state.u_hat[i] * self.e1[i] + n0[i] * self.hphi1[i] } else { Complex64::default() };
        }
        self.nonlinear(&a, &mut n1);
        for i in 0..a.len() {
            state.u_hat[i] = a[i] + (n1[i] - n0[i]) * self.hphi2[i];
        }
        self.hermitian_column(&mut state.u_hat);
        state.t += self.dt;
        state.step += 1;
        self.n0 = n0;
        self.n1 = n1;
        self.stage = a;
    }

    /// Projects the `kx = 0` column onto `û(0, -m) = conj û(0, m)`. The
    /// inverse r2c transform drops the other half, so it would grow
    /// unchecked at the linear rate.
    fn hermitian_column(&self, spec: &mut [Complex64]) {
        let ny = self.grid.ny;
        spec[0].im = 0.0;
        for iy in 1..ny.div_ceil(2) {
            let h = 0.5 * (spec[iy] + spec[ny - iy].conj());
            spec[iy] = h;
            spec[ny - iy] = h.conj();
        }
        if ny % 2 == 0 {
            spec[ny / 2].im = 0.0;
        }
    }

    /// State `u = u_p + v` (or `v` alone for linearized dynamics) from a
    /// physical perturbation `v`.
    pub fn state_from_perturbation(&mut self, v: &[f64]) -> SimState {
        let mut spec = vec![Complex64::default(); self.spectral_len()];
        self.to_spectral(v, &mut spec);
        if self.dynamics == Dynamics::Full {
            for (s, r) in spec.iter_mut().zip(&self.roll_hat) {
                *s += r;
            }
        }
        SimState { t: 0.0, step: 0, u_hat: spec }
    }

    /// Perturbation spectrum `v̂ = û - û_p` (or `û` for non-full dynamics).
    pub fn perturbation(&self, state: &SimState) -> Vec<Complex64> {
        match self.dynamics {
            Dynamics::Full => state.u_hat.iter().zip(&self.roll_hat).map(|(u, r)| u - r).collect(),
            _ => state.u_hat.clone(),
        }
    }

    /// Default step: `dt · 3 |u|²_∞ <= 0.1`, at most 0.5.
    pub fn default_dt(params: &Params) -> f64 {
        let (a1, a3) = crate::roll::roll_series_reference(params.eps, params.kappa);
        let u = a1.abs() + a3.abs();
        (0.1 / (3.0 * u * u)).min(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_functions() {
        for z in [-30.0f64, -1.0, -0.05, -1e-9, 0.0, 1e-7, 0.08] {
            let (p1, p2) = phi12(z);
            if z.abs() > 1e-3 {
                let e: f64 = z.exp();
                assert!((p1 - (e - 1.0) / z).abs() < 1e-13);
                assert!((p2 - (e - 1.0 - z) / (z * z)).abs() < 1e-9);
            } else {
                assert!((p1 - 1.0).abs() < 1e-3 && (p2 - 0.5).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn linear_mode_multiplier_is_exact() {
        let p = Params::new(0.3, 0.0).unwrap();
        let grid = Grid::new(&p, 4, 40.0, 64, 16).unwrap();
        let mut sim = Simulator::new(p, grid.clone(), 0.3, Dynamics::Linear).unwrap();
        let mut st = SimState { t: 0.0, step: 0, u_hat: vec![Complex64::default(); sim.spectral_len()] };
        let (mx, my) = (5, 2);
        grid.set_coeff(&mut st.u_hat, mx, my, Complex64::new(1e-3, 2e-4));
        let q2 = grid.qx(mx).powi(2) + grid.qy(my).powi(2);
        let rate = -(1.0 - q2).powi(2) + 0.09;
        for _ in 0..10 {
            sim.step(&mut st);
        }
        let got = grid.coeff(&st.u_hat, mx, my);
        let want = Complex64::new(1e-3, 2e-4) * (rate * 3.0).exp();
        assert!((got - want).norm() < 1e-15);
        assert!(grid.coeff(&st.u_hat, -mx, -my) == got.conj());
    }

    #[test]
    fn roll_is_stationary() {
        let p = Params::new(0.3, -0.01).unwrap();
        let grid = Grid::new(&p, 8, 20.0, 128, 8).unwrap();
        let mut sim = Simulator::new(p, grid, 0.25, Dynamics::Full).unwrap();
        let mut st = sim.state_from_perturbation(&vec![0.0; 128 * 8]);
        for _ in 0..100 {
            sim.step(&mut st);
        }
        let v = sim.perturbation(&st);
        assert!(sim.sup_norm(&v) < 1e-8);
        assert!(sim.max_imag_residue < 1e-12);
    }

    #[test]
    fn grid_validation() {
        let p = Params::new(0.3, 0.0).unwrap();
        assert!(Grid::new(&p, 4, 40.0, 100, 16).is_err());
        assert!(Grid::new(&p, 0, 40.0, 64, 16).is_err());
        let g = Grid::new(&p, 64, 40.0, 64, 1).unwrap();
        assert!(matches!(Simulator::new(p, g, 0.1, Dynamics::Full), Err(SimError::InvalidConfig(_))));
    }

    #[test]
    fn hermitian_storage() {
        let p = Params::new(0.3, 0.0).unwrap();
        let g = Grid::new(&p, 4, 40.0, 16, 8).unwrap();
        let mut s = vec![Complex64::default(); g.nxh() * g.ny];
        g.set_coeff(&mut s, 0, 3, Complex64::new(1.0, 2.0));
        assert_eq!(g.coeff(&s, 0, -3), Complex64::new(1.0, -2.0));
        g.set_coeff(&mut s, -2, 1, Complex64::new(0.5, 0.5));
        assert_eq!(g.coeff(&s, 2, -1), Complex64::new(0.5, -0.5));
    }
}
