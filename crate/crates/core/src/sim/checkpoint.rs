//! Binary checkpoints of a spectral state.
//!
//! Layout, all little-endian:
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 4     | magic `ZZCK`                              |
//! | 4     | format version, `u32` (= 1)               |
//! | 4     | dtype tag `c128` (pairs of `f64`)         |
//! | 8     | `nx`, `u64` (physical grid)               |
//! | 8     | `ny`, `u64`                               |
//! | 8     | `t`, `f64`                                |
//! | 8     | step count, `u64`                         |
//! | 16·n  | `n = (nx/2+1)·ny` values `(re, im)`       |
//!
//! Values follow the simulator's storage order `û[ix * ny + iy]`.

use super::{SimError, SimState};
use num_complex::Complex64;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"ZZCK";
const VERSION: u32 = 1;
const DTYPE: &[u8; 4] = b"c128";

pub fn write_checkpoint(path: &Path, nx: usize, ny: usize, state: &SimState) -> Result<(), SimError> {
    let n = (nx / 2 + 1) * ny;
    if state.u_hat.len() != n {
        return Err(SimError::Checkpoint(format!("state has {} values, grid needs {n}", state.u_hat.len())));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(DTYPE)?;
    w.write_all(&(nx as u64).to_le_bytes())?;
    w.write_all(&(ny as u64).to_le_bytes())?;
    w.write_all(&state.t.to_le_bytes())?;
    w.write_all(&state.step.to_le_bytes())?;
    for z in &state.u_hat {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Returns `(nx, ny, state)`.
pub fn read_checkpoint(path: &Path) -> Result<(usize, usize, SimState), SimError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    if &b4 != MAGIC {
        return Err(SimError::Checkpoint("bad magic".into()));
    }
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != VERSION {
        return Err(SimError::Checkpoint(format!("unsupported version {}", u32::from_le_bytes(b4))));
    }
    r.read_exact(&mut b4)?;
    if &b4 != DTYPE {
        return Err(SimError::Checkpoint("unsupported dtype".into()));
    }
    let mut next_u64 = |r: &mut BufReader<File>| -> Result<u64, SimError> {
        r.read_exact(&mut b8)?;
        Ok(u64::from_le_bytes(b8))
    };
    let nx = next_u64(&mut r)? as usize;
    let ny = next_u64(&mut r)? as usize;
    let t = f64::from_bits(next_u64(&mut r)?);
    let step = next_u64(&mut r)?;
    let n = (nx / 2 + 1)
        .checked_mul(ny)
        .ok_or_else(|| SimError::Checkpoint("dimensions overflow".into()))?;
    let mut u_hat = Vec::with_capacity(n);
    let mut pair = [0u8; 16];
    for _ in 0..n {
        r.read_exact(&mut pair)?;
        let re = f64::from_le_bytes(pair[..8].try_into().unwrap());
        let im = f64::from_le_bytes(pair[8..].try_into().unwrap());
        u_hat.push(Complex64::new(re, im));
    }
    if r.read(&mut b4)? != 0 {
        return Err(SimError::Checkpoint("trailing bytes".into()));
    }
    Ok((nx, ny, SimState { t, step, u_hat }))
}
