//! Decay experiments: a localized perturbation of the roll is evolved and
//! `|v(t)|_∞` is recorded on a log-spaced schedule, then fitted by a power law
//! over an automatically detected window.

use super::diagnostics::{h_norm_diagnostics, HNorms, LatticeBranch};
use super::{Dynamics, Grid, SimError, SimState, Simulator};
use crate::expansions::{kappa_z_closed_root, A1Source};
use crate::fit::{detect_window, fit_decay, logspace};
use crate::params::Params;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Largest variation of the local slope inside a fit window.
pub const WINDOW_SLOPE_VARIATION: f64 = 0.1;
/// Records with `|v|_∞` below this are round-off and are not fitted.
pub const NOISE_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaChoice {
    Fixed(f64),
    /// The closed-form zigzag boundary `κ_z(ε)`.
    AtZigzag,
    /// `κ_z(ε) + offset`.
    ZigzagOffset(f64),
}

impl KappaChoice {
    pub fn resolve(&self, eps: f64) -> Result<f64, SimError> {
        Ok(match *self {
            KappaChoice::Fixed(k) => k,
            KappaChoice::AtZigzag => kappa_z_closed_root(eps, A1Source::Roll)?,
            KappaChoice::ZigzagOffset(d) => kappa_z_closed_root(eps, A1Source::Roll)? + d,
        })
    }
}

/// Localized initial perturbation `δ G(x,y) η(k x) / max|G η|`: `η` is a
/// seeded trigonometric polynomial in the roll harmonics `n <= 3` (its
/// `sin(k x)` coefficient, the translation direction, has magnitude at
/// least 1/2) and `G` is a flattened Gaussian envelope whose Fourier
/// transform is `(1 + q²w²/2) exp(-q²w²/2)` in each direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub amplitude: f64,
    pub width_x: f64,
    pub width_y: f64,
    pub seed: u64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self { amplitude: 1e-3, width_x: std::f64::consts::PI, width_y: 2.0, seed: 1 }
    }
}

fn envelope(d: f64, w: f64) -> f64 {
    let z = d * d / (2.0 * w * w);
    (1.5 - z) * (-z).exp()
}

impl Perturbation {
    /// Harmonic profile coefficients `(cos n, sin n)` for `n = 0..=3`.
    pub fn profile(&self) -> [(f64, f64); 4] {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut c = [(0.0, 0.0); 4];
        for (n, slot) in c.iter_mut().enumerate() {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = if n == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) };
            *slot = (a, b);
        }
        if c[1].1.abs() < 0.5 {
            c[1].1 = if c[1].1 < 0.0 { -0.5 } else { 0.5 } + c[1].1;
        }
        c
    }

    /// Physical field on the grid (row-major), centred in the box.
    pub fn field(&self, grid: &Grid, k: f64) -> Vec<f64> {
        let prof = self.profile();
        let (cx, cy) = (0.5 * grid.lx, 0.5 * grid.ly);
        let mut v = vec![0.0; grid.nx * grid.ny];
        for iy in 0..grid.ny {
            let gy = if grid.ny == 1 { 1.0 } else { envelope(grid.y(iy) - cy, self.width_y) };
            for ix in 0..grid.nx {
                let x = grid.x(ix);
                let xi = k * x;
                let eta: f64 = prof
                    .iter()
                    .enumerate()
                    .map(|(n, (a, b))| a * (n as f64 * xi).cos() + b * (n as f64 * xi).sin())
                    .sum();
                v[iy * grid.nx + ix] = envelope(x - cx, self.width_x) * gy * eta;
            }
        }
        let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if sup > 0.0 {
            v.iter_mut().for_each(|x| *x *= self.amplitude / sup);
        }
        v
    }
}

/// Full description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub eps: f64,
    pub kappa: KappaChoice,
    pub periods_x: usize,
    pub length_y: f64,
    pub nx: usize,
    pub ny: usize,
    /// Time step; `None` picks [`Simulator::default_dt`].
    pub dt: Option<f64>,
    pub t_end: f64,
    /// First nonzero record time.
    pub t_first_record: f64,
    /// Number of log-spaced records after `t = 0`.
    pub n_records: usize,
    pub perturbation: Perturbation,
    /// Compute the Bloch-split norms at every record.
    pub diagnostics: bool,
    pub sigma0: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            eps: 0.3,
            kappa: KappaChoice::AtZigzag,
            periods_x: 85,
            length_y: 400.0,
            nx: 1024,
            ny: 256,
            dt: None,
            t_end: 3000.0,
            t_first_record: 1.0,
            n_records: 80,
            perturbation: Perturbation::default(),
            diagnostics: false,
            sigma0: crate::kernels::DEFAULT_SIGMA0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.t_end > 0.0) || !(self.t_first_record > 0.0) || self.t_first_record > self.t_end {
            return bad(format!("need 0 < t_first_record <= t_end (got {}, {})", self.t_first_record, self.t_end));
        }
        if self.n_records == 0 {
            return bad("n_records must be positive".into());
        }
        if !(self.perturbation.amplitude >= 0.0) || !(self.perturbation.width_x > 0.0) || !(self.perturbation.width_y > 0.0) {
            return bad("perturbation amplitude must be >= 0 and widths > 0".into());
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || dt > self.t_end {
                return bad(format!("dt = {dt} must lie in (0, t_end]"));
            }
        }
        if !(self.sigma0 > 0.0 && self.sigma0 <= crate::bloch::DEFAULT_SIGMA_MAX) {
            return bad(format!("sigma0 = {} must lie in (0, 0.25]", self.sigma0));
        }
        Ok(())
    }

    /// Record steps (deduplicated), including step 0.
    pub fn record_steps(&self, dt: f64) -> Vec<u64> {
        let mut steps: Vec<u64> = std::iter::once(0)
            .chain(logspace(self.t_first_record, self.t_end, self.n_records).iter().map(|t| (t / dt).round().max(1.0) as u64))
            .collect();
        steps.dedup();
        steps
    }
}

/// One recorded sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub v_inf: f64,
    pub norms: Option<HNorms>,
}

/// Outcome of a decay run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub eps: f64,
    pub kappa: f64,
    pub dt: f64,
    pub records: Vec<Record>,
    /// `-slope` of `|v|_∞` over the window.
    pub exponent: f64,
    pub std_err: f64,
    pub window: (f64, f64),
    pub max_imag_residue: f64,
}

/// Output of [`run_simulation`].
#[derive(Debug, Clone)]
pub struct SimRun {
    pub params: Params,
    pub dt: f64,
    pub records: Vec<Record>,
    pub max_imag_residue: f64,
    pub final_state: SimState,
}

/// Runs the experiment; `on_record` sees every record as it is produced.
pub fn run_simulation<F: FnMut(&Record)>(cfg: &SimConfig, mut on_record: F) -> Result<SimRun, SimError> {
    cfg.validate()?;
    let kappa = cfg.kappa.resolve(cfg.eps)?;
    let params = Params::new(cfg.eps, kappa)?;
    let grid = Grid::new(&params, cfg.periods_x, cfg.length_y, cfg.nx, cfg.ny)?;
    let dt = cfg.dt.unwrap_or_else(|| Simulator::default_dt(&params));
    let mut sim = Simulator::new(params, grid.clone(), dt, Dynamics::Full)?;
    let lattice = if cfg.diagnostics { Some(LatticeBranch::new(&sim.roll.clone(), &grid, cfg.sigma0)?) } else { None };
    let v0 = cfg.perturbation.field(&grid, params.wavenumber());
    let mut state = sim.state_from_perturbation(&v0);
    let initial = sim.sup_norm(&state.u_hat.clone());
    let steps = cfg.record_steps(dt);
    let mut records = Vec::with_capacity(steps.len());
    let record = |sim: &mut Simulator, st: &SimState| -> Result<Record, SimError> {
        let v = sim.perturbation(st);
        let v_inf = sim.sup_norm(&v);
        let norms = match &lattice {
            Some(lb) => Some(h_norm_diagnostics(lb, &sim.grid, &v, st.t)?),
            None => None,
        };
        Ok(Record { t: st.t, v_inf, norms })
    };
    for &target in &steps {
        while state.step < target {
            sim.step(&mut state);
            if !sim.last_sup.is_finite() || sim.last_sup > 10.0 * initial {
                return Err(SimError::BlowUp { t: state.t, norm: sim.last_sup, initial });
            }
        }
        let r = record(&mut sim, &state)?;
        on_record(&r);
        records.push(r);
    }
    Ok(SimRun { params, dt, records, max_imag_residue: sim.max_imag_residue, final_state: state })
}

/// Fits `|v(t)|_∞ ~ t^{-exponent}` over the detected window.
pub fn fit_records(records: &[Record]) -> Result<(f64, f64, (f64, f64)), SimError> {
    let (t, v): (Vec<f64>, Vec<f64>) = records.iter().filter(|r| r.t > 0.0 && r.v_inf > NOISE_FLOOR).map(|r| (r.t, r.v_inf)).unzip();
    let window = detect_window(&t, &v, WINDOW_SLOPE_VARIATION).map_err(|_| SimError::WindowNotFound)?;
    let c = fit_decay(&t, &v, window)?;
    Ok((-c.fitted_slope, c.slope_std_err, window))
}

/// Simulates and fits.
pub fn run_decay_experiment(cfg: &SimConfig) -> Result<DecayReport, SimError> {
    let run = run_simulation(cfg, |_| {})?;
    let (exponent, std_err, window) = fit_records(&run.records)?;
    Ok(DecayReport {
        eps: run.params.eps,
        kappa: run.params.kappa,
        dt: run.dt,
        records: run.records,
        exponent,
        std_err,
        window,
        max_imag_residue: run.max_imag_residue,
    })
}
