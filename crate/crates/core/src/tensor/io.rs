//! The `.dt` dense tensor container.
//!
//! Layout: magic `DTEN`, `u32` version (1), `u32` order N, N `u64` dims, then
//! the entries as little-endian `f64` in flat (first index fastest) order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CpModel, DenseTensor, Matrix, TrModel};
use crate::error::{Error, Result};

pub const DT_MAGIC: &[u8; 4] = b"DTEN";
pub const DT_VERSION: u32 = 1;

pub fn write_dt(path: impl AsRef<Path>, x: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DT_MAGIC)?;
    w.write_all(&DT_VERSION.to_le_bytes())?;
    w.write_all(&(x.order() as u32).to_le_bytes())?;
    for &d in x.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in x.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dt(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("file too short".into()))?;
    if &magic != DT_MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = read_u32(&mut r)?;
    if version != DT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = read_u32(&mut r)? as usize;
    if n == 0 {
        return Err(Error::Format("zero-order tensor".into()));
    }
    let mut dims = Vec::with_capacity(n);
    for _ in 0..n {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)
            .map_err(|_| Error::Format("truncated header".into()))?;
        let d = u64::from_le_bytes(b);
        dims.push(usize::try_from(d).map_err(|_| Error::Format("dimension too large".into()))?);
    }
    let len = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format("entry count overflows".into()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(Error::Format(format!(
            "expected {} data bytes, found {}",
            len * 8,
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseTensor::new(dims, data).map_err(|e| Error::Format(e.to_string()))
}

fn model_path(prefix: &str, kind: &str, j: usize) -> String {
    format!("{prefix}_{kind}_{j}.dt")
}

/// Writes factor `j` to `{prefix}_factor_{j}.dt` as an `I_j × R` tensor.
pub fn write_cp_model(prefix: &str, model: &CpModel) -> Result<()> {
    for (j, a) in model.factors().iter().enumerate() {
        let t = DenseTensor::new(vec![a.rows(), a.cols()], a.data().to_vec())?;
        write_dt(model_path(prefix, "factor", j), &t)?;
    }
    Ok(())
}

/// Reads `{prefix}_factor_0.dt`, `{prefix}_factor_1.dt`, … until the first missing file.
pub fn read_cp_model(prefix: &str) -> Result<CpModel> {
    let mut factors = Vec::new();
    while Path::new(&model_path(prefix, "factor", factors.len())).exists() {
        let t = read_dt(model_path(prefix, "factor", factors.len()))?;
        if t.order() != 2 {
            return Err(Error::Format(format!("factor {} is {}-way", factors.len(), t.order())));
        }
        let (rows, cols) = (t.dims()[0], t.dims()[1]);
        factors.push(Matrix::from_col_major(rows, cols, t.into_data())?);
    }
    if factors.is_empty() {
        return Err(Error::Format(format!("no factor files with prefix {prefix:?}")));
    }
    CpModel::new(factors)
}

/// Writes core `c` to `{prefix}_core_{c}.dt`.
pub fn write_tr_model(prefix: &str, model: &TrModel) -> Result<()> {
    for (c, g) in model.cores().iter().enumerate() {
        write_dt(model_path(prefix, "core", c), g)?;
    }
    Ok(())
}

/// Reads `{prefix}_core_0.dt`, `{prefix}_core_1.dt`, … until the first missing file.
pub fn read_tr_model(prefix: &str) -> Result<TrModel> {
    let mut cores = Vec::new();
    while Path::new(&model_path(prefix, "core", cores.len())).exists() {
        cores.push(read_dt(model_path(prefix, "core", cores.len()))?);
    }
    if cores.is_empty() {
        return Err(Error::Format(format!("no core files with prefix {prefix:?}")));
    }
    TrModel::new(cores)
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}
