//! PFM1 model files.
//!
//! ```text
//! 0   4   magic "PFM1"
//! 4   4   u32 version (1)
//! 8   4   u32 header length
//! 12  .   UTF-8 JSON {task, dim, hidden, dropout, bin_edges}
//! .   .   f64 LE tensors: V (hidden x dim, row-major), w, head_W, head_b
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::model::{output_dim, MilModel};
use crate::data::TaskKind;
use crate::error::{Error, Result};

pub const PFM_MAGIC: &[u8; 4] = b"PFM1";
pub const PFM_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    task: TaskKind,
    dim: usize,
    hidden: usize,
    dropout: f64,
    bin_edges: Vec<f64>,
}

pub fn encode_model(model: &MilModel) -> Result<Vec<u8>> {
    model.validate()?;
    let header = serde_json::to_vec(&Header {
        task: model.task,
        dim: model.dim(),
        hidden: model.hidden(),
        dropout: model.dropout,
        bin_edges: model.bin_edges.clone(),
    })?;
    let mut out = Vec::with_capacity(12 + header.len() + 8 * model.n_params());
    out.extend_from_slice(PFM_MAGIC);
    out.extend_from_slice(&PFM_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    let params =
        model.attn_v.iter().chain(model.attn_w.iter()).chain(model.head_w.iter()).chain(model.head_b.iter());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format { offset: offset as u64, message: message.into() }
}

pub fn decode_model(buf: &[u8]) -> Result<MilModel> {
    if buf.len() < 12 || &buf[..4] != PFM_MAGIC {
        return Err(format_err(0, "not a PFM1 model file"));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != PFM_VERSION {
        return Err(format_err(4, format!("unsupported model version {version}")));
    }
    let hlen = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let body = 12usize.checked_add(hlen).filter(|&e| e <= buf.len()).ok_or_else(|| format_err(8, "truncated header"))?;
    let header: Header = serde_json::from_slice(&buf[12..body]).map_err(|e| format_err(12, e.to_string()))?;
    header.task.validate()?;
    let out = output_dim(header.task);
    let (h, d) = (header.hidden, header.dim);
    let count = h
        .checked_mul(d)
        .and_then(|hd| out.checked_mul(d).and_then(|od| hd.checked_add(od)))
        .and_then(|n| n.checked_add(h + out))
        .ok_or_else(|| format_err(12, "parameter count overflows"))?;
    let need = count.checked_mul(8).ok_or_else(|| format_err(12, "parameter count overflows"))?;
    if buf.len() - body != need {
        return Err(format_err(body, format!("expected {need} parameter bytes, found {}", buf.len() - body)));
    }
    let mut vals = buf[body..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |n: usize| -> Vec<f64> { vals.by_ref().take(n).collect() };
    let attn_v = Array2::from_shape_vec((h, d), take(h * d)).map_err(|e| format_err(body, e.to_string()))?;
    let attn_w = Array1::from(take(h));
    let head_w = Array2::from_shape_vec((out, d), take(out * d)).map_err(|e| format_err(body, e.to_string()))?;
    let head_b = Array1::from(take(out));
    let model =
        MilModel { task: header.task, attn_v, attn_w, head_w, head_b, dropout: header.dropout, bin_edges: header.bin_edges };
    model.validate()?;
    Ok(model)
}

pub fn write_model(model: &MilModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_model(model)?)?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<MilModel> {
    decode_model(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut m = MilModel::new(TaskKind::Survival { bins: 4 }, 7, 5, 3).unwrap();
        m.bin_edges = vec![1.0, 2.5, 7.0];
        let back = decode_model(&encode_model(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_bad_files() {
        let m = MilModel::new(TaskKind::Binary, 3, 2, 0).unwrap();
        let buf = encode_model(&m).unwrap();
        assert!(matches!(decode_model(b"PFB1xxxxxxxxxxxx"), Err(Error::Format { offset: 0, .. })));
        assert!(decode_model(&buf[..buf.len() - 3]).is_err());
        let mut v2 = buf.clone();
        v2[4] = 2;
        assert!(matches!(decode_model(&v2), Err(Error::Format { offset: 4, .. })));
    }
}
