//! `CSX1` weight container.
//!
//! Layout, all integers little-endian:
//! `"CSX1"`, u32 tensor count, then per tensor: u32 name length, UTF-8
//! name, u32 rank, rank x u64 dims, product(dims) x f64 values
//! (row-major for matrices).

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fusion::{EpochRecord, FusionModel, Variant};
use super::nn::{Activation, Dense, Mlp};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CSX1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

fn bad(detail: impl Into<String>) -> Error {
    Error::Format { what: "CSX1 container", detail: detail.into() }
}

pub fn write_tensors<W: Write>(mut w: W, tensors: &[Tensor]) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in tensors {
        w.write_all(&(t.name.len() as u32).to_le_bytes())?;
        w.write_all(t.name.as_bytes())?;
        w.write_all(&(t.dims.len() as u32).to_le_bytes())?;
        for &d in &t.dims {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in &t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<Tensor>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| bad(e.to_string()))?;
    let mut cur = Cursor { bytes: &bytes, at: 0 };
    if cur.take(4)? != MAGIC {
        return Err(bad("missing magic bytes"));
    }
    let count = cur.u32()?;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = cur.u32()?;
        let name = String::from_utf8(cur.take(len)?.to_vec()).map_err(|_| bad("tensor name is not UTF-8"))?;
        let rank = cur.u32()?;
        let dims = (0..rank).map(|_| cur.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| bad("tensor too large"))?;
        let raw = cur.take(n.checked_mul(8).ok_or_else(|| bad("tensor too large"))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        out.push(Tensor { name, dims, data });
    }
    if cur.at != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| bad("truncated"))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Everything but the weights, written as JSON next to the container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: String,
    pub variant: Variant,
    /// Per part, per layer: (activation, dropout).
    pub parts: Vec<(String, Vec<(Activation, f64)>)>,
    pub trace: Vec<EpochRecord>,
    /// Free-form hyperparameters (training and architecture settings).
    pub hyperparameters: serde_json::Value,
}

fn tensors_of(model: &FusionModel) -> Vec<Tensor> {
    let mut out = Vec::new();
    for (part, mlp) in parts(model) {
        for (i, layer) in mlp.layers.iter().enumerate() {
            let w = &layer.weight;
            let row_major: Vec<f64> = (0..w.nrows()).flat_map(|r| w.row(r).iter().copied().collect::<Vec<_>>()).collect();
            out.push(Tensor { name: format!("{part}.{i}.weight"), dims: vec![w.nrows(), w.ncols()], data: row_major });
            out.push(Tensor { name: format!("{part}.{i}.bias"), dims: vec![layer.bias.len()], data: layer.bias.as_slice().to_vec() });
        }
    }
    out
}

fn parts(model: &FusionModel) -> Vec<(&'static str, &Mlp)> {
    let mut out = Vec::new();
    if let Some(m) = &model.spectral_branch {
        out.push(("spectral_branch", m));
    }
    if let Some(m) = &model.meta_branch {
        out.push(("meta_branch", m));
    }
    out.push(("head", &model.head));
    out
}

/// Writes `<stem>.csx` and `<stem>.json`.
pub fn save_model(model: &FusionModel, hyperparameters: serde_json::Value, stem: &Path) -> Result<()> {
    let csx = stem.with_extension("csx");
    let json = stem.with_extension("json");
    let mut buf = Vec::new();
    write_tensors(&mut buf, &tensors_of(model)).map_err(|e| Error::io(&csx, e))?;
    std::fs::write(&csx, buf).map_err(|e| Error::io(&csx, e))?;
    let sidecar = Sidecar {
        format: "CSX1".into(),
        variant: model.variant,
        parts: parts(model)
            .into_iter()
            .map(|(n, m)| (n.to_string(), m.layers.iter().map(|l| (l.activation, l.dropout)).collect()))
            .collect(),
        trace: model.trace.clone(),
        hyperparameters,
    };
    std::fs::write(&json, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(&json, e))?;
    Ok(())
}

pub fn load_model(stem: &Path) -> Result<FusionModel> {
    let csx = stem.with_extension("csx");
    let json = stem.with_extension("json");
    let text = std::fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text)?;
    let file = std::fs::File::open(&csx).map_err(|e| Error::io(&csx, e))?;
    let tensors = read_tensors(std::io::BufReader::new(file))?;
    let find = |name: &str| tensors.iter().find(|t| t.name == name).ok_or_else(|| bad(format!("missing tensor {name}")));
    let mut spectral_branch = None;
    let mut meta_branch = None;
    let mut head = None;
    for (part, layers) in &sidecar.parts {
        let mut dense = Vec::new();
        for (i, &(activation, dropout)) in layers.iter().enumerate() {
            let w = find(&format!("{part}.{i}.weight"))?;
            let b = find(&format!("{part}.{i}.bias"))?;
            if w.dims.len() != 2 || b.dims != [w.dims[0]] {
                return Err(bad(format!("inconsistent shapes in {part}.{i}")));
            }
            dense.push(Dense {
                weight: DMatrix::from_row_slice(w.dims[0], w.dims[1], &w.data),
                bias: DVector::from_column_slice(&b.data),
                activation,
                dropout,
            });
        }
        let mlp = Some(Mlp { layers: dense });
        match part.as_str() {
            "spectral_branch" => spectral_branch = mlp,
            "meta_branch" => meta_branch = mlp,
            "head" => head = mlp,
            other => return Err(bad(format!("unknown part {other}"))),
        }
    }
    let head = head.ok_or_else(|| bad("sidecar lists no head"))?;
    Ok(FusionModel { variant: sidecar.variant, spectral_branch, meta_branch, head, trace: sidecar.trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::fusion::Architecture;

    #[test]
    fn header_bytes_are_fixed() {
        let mut buf = Vec::new();
        write_tensors(&mut buf, &[Tensor { name: "a".into(), dims: vec![2], data: vec![1.0, -2.0] }]).unwrap();
        assert_eq!(&buf[..4], b"CSX1");
        assert_eq!(&buf[4..8], &1u32.to_le_bytes());
        assert_eq!(&buf[8..12], &1u32.to_le_bytes());
        assert_eq!(buf[12], b'a');
        assert_eq!(buf.len(), 4 + 4 + 4 + 1 + 4 + 8 + 16);
        assert_eq!(read_tensors(&buf[..]).unwrap()[0].data, vec![1.0, -2.0]);
        assert!(read_tensors(&buf[..buf.len() - 1]).is_err());
        assert!(read_tensors(&b"CSX2"[..]).is_err());
    }

    #[test]
    fn models_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for v in Variant::ALL {
            let m = FusionModel::new(v, &Architecture::default(), 7, 3, 11).unwrap();
            let stem = dir.path().join(v.as_str());
            save_model(&m, serde_json::json!({"seed": 11}), &stem).unwrap();
            assert_eq!(load_model(&stem).unwrap(), m);
        }
    }
}
