//! Volume files and projection images.
//!
//! A volume is a pair sharing a basename: `foo.vol` holds raw little-endian
//! `f32` values in x-fastest order, `foo.json` holds
//! `{"dims":[X,Y,Z],"kind":"predicted|ground-truth"}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::volume::{Dims, DistanceVolume, Grid2, VolumeKind};

#[derive(Debug, Deserialize)]
struct Sidecar {
    dims: [usize; 3],
    kind: VolumeKind,
}

/// Strips a trailing `.vol` / `.json` so either file or the bare basename can be passed.
pub fn volume_basename(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("vol") | Some("json") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

fn with_suffix(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn volume_paths(path: &Path) -> (PathBuf, PathBuf) {
    let base = volume_basename(path);
    (with_suffix(&base, "vol"), with_suffix(&base, "json"))
}

fn write_raw(path: &Path, dims: Dims, values: &[f64], kind: &str) -> Result<()> {
    let (raw, side) = volume_paths(path);
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for &v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(&raw, bytes).map_err(|e| Error::io(&raw, e))?;
    let text = serde_json::json!({ "dims": [dims.x, dims.y, dims.z], "kind": kind }).to_string();
    fs::write(&side, text).map_err(|e| Error::io(&side, e))
}

pub fn write_volume(path: &Path, vol: &DistanceVolume) -> Result<()> {
    write_raw(path, vol.dims(), vol.values(), vol.kind().as_str())
}

/// Writes a signed field (e.g. a gradient) in the volume layout with
/// sidecar kind `"gradient"`. Not readable by [`read_volume`].
pub fn write_gradient(path: &Path, dims: Dims, values: &[f64]) -> Result<()> {
    if values.len() != dims.len() {
        return Err(Error::shape(dims.len(), values.len()));
    }
    write_raw(path, dims, values, "gradient")
}

pub fn read_volume(path: &Path) -> Result<DistanceVolume> {
    let (raw, side) = volume_paths(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: Sidecar = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: side.clone(),
        source: e,
    })?;
    let dims = Dims::new(meta.dims[0], meta.dims[1], meta.dims[2])?;
    let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    if bytes.len() != dims.len() * 4 {
        return Err(Error::shape(
            format!("{} bytes for {}", dims.len() * 4, dims),
            format!("{} bytes in {}", bytes.len(), raw.display()),
        ));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    DistanceVolume::from_values(dims, values, meta.kind)
}

/// 16-bit binary PGM with values scaled by `4096 / d_max`. Lossy; for viewing only.
pub fn encode_pgm(map: &Grid2, d_max: f64) -> Vec<u8> {
    let scale = 4096.0 / d_max;
    let mut out = format!("P5\n{} {}\n65535\n", map.width(), map.height()).into_bytes();
    for &v in map.values() {
        let q = (v * scale).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

pub fn write_pgm(path: &Path, map: &Grid2, d_max: f64) -> Result<()> {
    fs::write(path, encode_pgm(map, d_max)).map_err(|e| Error::io(path, e))
}
