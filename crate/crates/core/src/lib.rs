//! Zigzag stability of Swift–Hohenberg roll solutions.
//!
//! Modules, bottom-up:
//! - [`roll`]: periodic roll solutions by Fourier–Galerkin Newton iteration;
//! - [`bloch`]: Bloch operators, spectra and the critical eigenvalue branch;
//! - [`expansions`]: closed-form coefficients, zigzag boundary, dispersion fits;
//! - [`semigroup`]: norms of the model decay kernels and power-law fits;
//! - [`kernels`]: mode splitting and the quadratic interaction kernel;
//! - [`sim`]: pseudospectral time stepping of the full equation;
//! - [`io`]: CSV / JSON-lines records shared by the tools.

pub mod bloch;
pub mod expansions;
pub mod fit;
pub mod io;
pub mod kernels;
pub mod params;
pub mod quadrature;
pub mod roll;
pub mod semigroup;
pub mod sim;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use bloch::{
    assemble_operator, critical_branch, critical_branch_with, parity_check, spectral_gap, BlochError,
    BlochOperatorMatrix, BranchOptions, EigenBranch, ParityReport,
};
pub use expansions::{
    c2_closed, c2_main, eta_terms, fit_dispersion, kappa_z_root, kappa_z_series, mu, A1Source, DispersionFit,
    EtaTerms, ExpansionError, ZigzagResult,
};
pub use fit::{DecayCurve, FitError};
pub use kernels::{k1_kernel, split_modes, BranchInterpolant, KernelError, KernelSample, ModeSplit};
pub use params::{Params, ParamsError, SigmaPoint};
pub use roll::{residual, roll_series_reference, solve_roll, RollError, RollSolution, RollSolver};
pub use semigroup::{kernel_norm, DecayLawSpec, NormKind, SemigroupError};
pub use sim::{SimConfig, SimError, SimState, Simulator};
