//! AGF1 binary field dumps.
//!
//! Layout: magic `AGF1`, little-endian u32 dimension, u32 points per axis
//! (cubic grids only), f64 box length, f64 time stamp, then `n^d` f64 values
//! row-major with the last axis fastest.

use super::{Grid, GridError, ScalarField};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"AGF1";

#[derive(Debug, Error)]
pub enum AgfError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes, not an AGF1 file")]
    BadMagic,
    #[error("value payload has {got} bytes, expected {expected}")]
    SizeMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

pub fn write_agf(path: &Path, f: &ScalarField) -> Result<(), AgfError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(f.grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(f.grid.points_per_axis() as u32).to_le_bytes())?;
    w.write_all(&f.grid.box_length().to_le_bytes())?;
    w.write_all(&f.t.to_le_bytes())?;
    for v in &f.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_agf(path: &Path) -> Result<ScalarField, AgfError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(AgfError::BadMagic);
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let d = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf)?;
    let n = u32::from_le_bytes(u32buf) as usize;
    let mut f64buf = [0u8; 8];
    r.read_exact(&mut f64buf)?;
    let box_length = f64::from_le_bytes(f64buf);
    r.read_exact(&mut f64buf)?;
    let t = f64::from_le_bytes(f64buf);

    let grid = Grid::new(d, n, box_length)?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    let expected = grid.len() * 8;
    if payload.len() != expected {
        return Err(AgfError::SizeMismatch {
            got: payload.len(),
            expected,
        });
    }
    let mut values = Vec::with_capacity(grid.len());
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(AgfError::NonFinite(i));
        }
        values.push(v);
    }
    Ok(ScalarField { grid, values, t })
}
