//! Real 2-D FFT on an `ny × nx` periodic grid.
//!
//! Physical fields are row-major `u[iy * nx + ix]`. Spectra keep only
//! `m_x = 0..=nx/2` and are stored x-major, `û[ix * ny + iy]`, so the
//! y-transforms run on contiguous columns. The forward transform is scaled
//! by `1/(nx ny)`, making `û` the Fourier coefficients of `u`.

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct Fft2 {
    nx: usize,
    ny: usize,
    nxh: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    row_in: Vec<f64>,
    row_spec: Vec<Complex64>,
    rows: Vec<Complex64>,
    r_scratch: Vec<Complex64>,
    c_scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({} x {})", self.ny, self.nx)
    }
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        assert!(nx >= 2 && nx % 2 == 0 && ny >= 1, "need even nx and ny >= 1");
        let mut rp = RealFftPlanner::<f64>::new();
        let r2c = rp.plan_fft_forward(nx);
        let c2r = rp.plan_fft_inverse(nx);
        let mut cp = FftPlanner::<f64>::new();
        let fwd = cp.plan_fft_forward(ny);
        let inv = cp.plan_fft_inverse(ny);
        let nxh = nx / 2 + 1;
        let rs = r2c.get_scratch_len().max(c2r.get_scratch_len());
        let cs = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self {
            nx,
            ny,
            nxh,
            r2c,
            c2r,
            fwd,
            inv,
            row_in: vec![0.0; nx],
            row_spec: vec![Complex64::default(); nxh],
            rows: vec![Complex64::default(); ny * nxh],
            r_scratch: vec![Complex64::default(); rs],
            c_scratch: vec![Complex64::default(); cs],
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    /// Number of stored x-wavenumbers, `nx/2 + 1`.
    pub fn nxh(&self) -> usize {
        self.nxh
    }
    pub fn spectral_len(&self) -> usize {
        self.nxh * self.ny
    }

    pub fn forward(&mut self, u: &[f64], out: &mut [Complex64]) {
        let (nx, ny, nxh) = (self.nx, self.ny, self.nxh);
        let scale = 1.0 / (nx * ny) as f64;
        for iy in 0..ny {
            self.row_in.copy_from_slice(&u[iy * nx..(iy + 1) * nx]);
            self.r2c
                .process_with_scratch(&mut self.row_in, &mut self.row_spec, &mut self.r_scratch)
                .expect("r2c sizes are fixed at construction");
            for ix in 0..nxh {
                out[ix * ny + iy] = self.row_spec[ix] * scale;
            }
        }
        if ny > 1 {
            self.fwd.process_with_scratch(out, &mut self.c_scratch);
        }
    }

    /// Inverse transform into `u`. Returns the largest imaginary part found
    /// in the self-conjugate `m_x = 0` and `m_x = nx/2` rows, which a
    /// Hermitian spectrum would leave at zero; those parts are discarded.
    pub fn inverse(&mut self, spec: &[Complex64], u: &mut [f64]) -> f64 {
        let (nx, ny, nxh) = (self.nx, self.ny, self.nxh);
        self.rows.copy_from_slice(spec);
        if ny > 1 {
            self.inv.process_with_scratch(&mut self.rows, &mut self.c_scratch);
        }
        let mut residue = 0.0f64;
        for iy in 0..ny {
            for ix in 0..nxh {
                self.row_spec[ix] = self.rows[ix * ny + iy];
            }
            residue = residue.max(self.row_spec[0].im.abs()).max(self.row_spec[nxh - 1].im.abs());
            self.row_spec[0].im = 0.0;
            self.row_spec[nxh - 1].im = 0.0;
            self.c2r
                .process_with_scratch(&mut self.row_spec, &mut self.row_in, &mut self.r_scratch)
                .expect("self-conjugate entries were made real");
            u[iy * nx..(iy + 1) * nx].copy_from_slice(&self.row_in);
        }
        residue
    }
}
