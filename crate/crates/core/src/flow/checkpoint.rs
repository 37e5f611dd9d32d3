//! Binary checkpoints of a flow state.
//!
//! Layout, all little-endian: the magic `LMCF`, a `u32` version, `n` as
//! `u32`, the `n` grid sizes as `u32`, the `n` periods as `f64`, then `t`,
//! `κ` and the row-major values of `u` as `f64`. Derivative jets are not
//! stored; they are recomputed on load.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::field::{FieldError, GridSpec, PeriodicScalarField};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"LMCF";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after checkpoint data")]
    TrailingBytes(usize),
    #[error("invalid checkpoint contents: {0}")]
    Invalid(#[from] FieldError),
    #[error("non-finite {0} in checkpoint")]
    NonFinite(&'static str),
}

/// Everything a checkpoint holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub u: PeriodicScalarField,
    pub t: f64,
    pub kappa: f64,
}

pub fn encode_checkpoint(u: &PeriodicScalarField, t: f64, kappa: f64) -> Vec<u8> {
    let spec = u.spec();
    let n = spec.dim();
    let mut out = Vec::with_capacity(12 + 12 * n + 16 + 8 * spec.len());
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for &s in spec.sizes() {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for &p in spec.periods() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out.extend_from_slice(&t.to_le_bytes());
    out.extend_from_slice(&kappa.to_le_bytes());
    for &v in u.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        let end = self.pos + N;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or(CheckpointError::Truncated(self.bytes.len()))?;
        self.pos = end;
        Ok(chunk.try_into().unwrap())
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        self.take::<8>().map(f64::from_le_bytes)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take::<4>().map_err(|_| CheckpointError::BadMagic)? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let n = r.u32()? as usize;
    if n == 0 || n > crate::field::MAX_DIM {
        return Err(FieldError::InvalidGrid(format!("dimension {n}")).into());
    }
    let sizes = (0..n)
        .map(|_| r.u32().map(|s| s as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let periods = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let spec = GridSpec::new(sizes, periods)?;
    let t = r.f64()?;
    let kappa = r.f64()?;
    if !t.is_finite() {
        return Err(CheckpointError::NonFinite("t"));
    }
    if !kappa.is_finite() {
        return Err(CheckpointError::NonFinite("kappa"));
    }
    let values = (0..spec.len())
        .map(|_| r.f64())
        .collect::<Result<Vec<_>, _>>()?;
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
    }
    let u = PeriodicScalarField::new(spec, values)?;
    Ok(Checkpoint { u, t, kappa })
}

/// Writes atomically: the data goes to a sibling temporary file that is
/// then renamed over `path`.
pub fn checkpoint_save(
    path: &Path,
    u: &PeriodicScalarField,
    t: f64,
    kappa: f64,
) -> Result<(), CheckpointError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, encode_checkpoint(u, t, kappa))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn checkpoint_load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    decode_checkpoint(&fs::read(path)?)
}
