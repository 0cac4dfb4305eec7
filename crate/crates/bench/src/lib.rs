//! Fixtures shared by the benchmarks.

use zzlab_core::params::{symmetric_axis, tensor_grid};
use zzlab_core::sim::{Dynamics, Grid, Perturbation, SimState, Simulator};
use zzlab_core::{solve_roll, Params, RollSolution, SigmaPoint};

pub const EPS: f64 = 0.2;
pub const KAPPA: f64 = 0.03;
pub const TRUNCATION: usize = 32;

pub fn params() -> Params {
    Params::new(EPS, KAPPA).expect("valid parameters")
}

pub fn roll() -> RollSolution {
    solve_roll(params(), 9).expect("roll converges")
}

/// `n × n` tensor grid on `[-r, r]²`.
pub fn sigma_square(r: f64, n: usize) -> Vec<SigmaPoint> {
    let axis = symmetric_axis(r, n);
    tensor_grid(&axis, &axis)
}

/// Full-equation simulator on an `nx × ny` box with a localized perturbation.
pub fn simulator(nx: usize, ny: usize) -> (Simulator, SimState) {
    let p = params();
    let grid = Grid::new(&p, nx / 16, 40.0, nx, ny).expect("valid grid");
    let dt = Simulator::default_dt(&p);
    let mut sim = Simulator::new(p, grid, dt, Dynamics::Full).expect("simulator builds");
    let v = Perturbation { amplitude: 0.05, ..Perturbation::default() }.field(&sim.grid, p.wavenumber());
    let st = sim.state_from_perturbation(&v);
    (sim, st)
}
