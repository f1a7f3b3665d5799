//! Binary model file.
//!
//! Layout (little-endian): 8-byte magic, `u32` version, `u64` m, `u64` n,
//! `u64` seed, then `f64` arrays W (row-major, m·n), b (m), c (n), sigma (m).

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::GbrbmModel;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"NEGBRBM\0";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8 + 8 + 8;

pub(super) fn save(model: &GbrbmModel, path: &Path) -> Result<()> {
    let (m, n) = model.weights.dim();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * (m * n + 2 * m + n));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(m as u64).to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&model.seed.to_le_bytes());
    let arrays = model.weights.iter().chain(&model.visible_bias).chain(&model.hidden_bias).chain(&model.sigma);
    for x in arrays {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub(super) fn load(path: &Path) -> Result<GbrbmModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!("model file truncated ({} bytes)", bytes.len())));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != VERSION {
        return Err(Error::VersionMismatch { expected: VERSION, found: version });
    }
    let (m, n, seed) = (u64_at(12) as usize, u64_at(20) as usize, u64_at(28));
    let expected = m
        .checked_mul(n)
        .and_then(|mn| mn.checked_add(2 * m + n))
        .and_then(|k| k.checked_mul(8))
        .and_then(|k| k.checked_add(HEADER_LEN));
    if m == 0 || n == 0 || expected != Some(bytes.len()) {
        return Err(Error::Corrupt(format!("dims {m}x{n} do not match file length {} bytes", bytes.len())));
    }
    let mut values = bytes[HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |len: usize| -> Vec<f64> { values.by_ref().take(len).collect() };
    let weights = Array2::from_shape_vec((m, n), take(m * n)).expect("length checked");
    let visible_bias = Array1::from(take(m));
    let hidden_bias = Array1::from(take(n));
    let sigma = Array1::from(take(m));
    let model = GbrbmModel { weights, visible_bias, hidden_bias, sigma, seed };
    model.validate()?;
    Ok(model)
}
