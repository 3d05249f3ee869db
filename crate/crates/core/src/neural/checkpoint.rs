//! `VGNN` checkpoints: magic, `u32` version, `u32` spec length, the spec as
//! JSON, `u64` parameter count and the f32 parameters, little-endian.

use std::fs;
use std::path::Path;

use super::model::Model;
use super::spec::ModelSpec;
use crate::container::Reader;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VGNN";
pub const VERSION: u32 = 1;

pub fn encode_checkpoint(model: &Model<f32>) -> Result<Vec<u8>> {
    let spec = serde_json::to_vec(model.spec())?;
    let mut out = Vec::with_capacity(20 + spec.len() + 4 * model.param_len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.len() as u32).to_le_bytes());
    out.extend_from_slice(&spec);
    out.extend_from_slice(&(model.param_len() as u64).to_le_bytes());
    for v in model.params() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Model<f32>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::format(0, "bad magic, expected VGNN"));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::format(
            4,
            format!("unsupported checkpoint version {version}"),
        ));
    }
    let len = r.u32("spec length")? as usize;
    let spec_at = r.pos as u64;
    let spec: ModelSpec = serde_json::from_slice(r.take(len, "spec")?)
        .map_err(|e| Error::format(spec_at, format!("spec JSON: {e}")))?;
    let count_at = r.pos as u64;
    let count = u64::from_le_bytes(r.take(8, "parameter count")?.try_into().unwrap());
    let n = usize::try_from(count)
        .ok()
        .filter(|&n| n <= (bytes.len() - r.pos) / 4)
        .ok_or_else(|| {
            Error::format(count_at, format!("parameter count {count} exceeds payload"))
        })?;
    let params: Vec<f32> = r
        .take(n * 4, "parameters")?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if r.pos != bytes.len() {
        return Err(Error::format(
            r.pos as u64,
            "trailing bytes after parameters",
        ));
    }
    Model::from_params(spec, params)
}

pub fn write_checkpoint(model: &Model<f32>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(model)?)?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Model<f32>> {
    decode_checkpoint(&fs::read(path)?)
}
