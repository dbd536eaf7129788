//! `VSEM1` binary embedding container.
//!
//! Layout, all little-endian: 5-byte magic `VSEM1`, `u16` version, `u32` rows,
//! `u32` dim, then `rows * dim` `f32` values in row-major order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::FrameEmbeddings;

pub const MAGIC: &[u8; 5] = b"VSEM1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 5 + 2 + 4 + 4;

pub fn encode_embeddings(emb: &FrameEmbeddings) -> Result<Vec<u8>> {
    let rows = u32::try_from(emb.n_frames()).map_err(|_| Error::invalid("too many rows for VSEM1"))?;
    let dim = u32::try_from(emb.dim()).map_err(|_| Error::invalid("dimension too large for VSEM1"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + emb.as_slice().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for v in emb.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_embeddings(bytes: &[u8], path: &Path) -> Result<FrameEmbeddings> {
    let fail = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(fail(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[..5] != MAGIC {
        return Err(fail("bad magic, expected VSEM1".into()));
    }
    let version = u16::from_le_bytes([bytes[5], bytes[6]]);
    if version != VERSION {
        return Err(fail(format!("unsupported version {version}")));
    }
    let rows = u32::from_le_bytes(bytes[7..11].try_into().expect("4 bytes")) as usize;
    let dim = u32::from_le_bytes(bytes[11..15].try_into().expect("4 bytes")) as usize;
    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| fail("declared size overflows".into()))?;
    if bytes.len() < expected {
        return Err(fail(format!(
            "truncated payload: {rows}x{dim} needs {expected} bytes, found {}",
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(fail(format!("{} trailing bytes", bytes.len() - expected)));
    }
    let data: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    FrameEmbeddings::new(data, rows, dim).map_err(|e| fail(e.to_string()))
}

pub fn load_embeddings(path: &Path) -> Result<FrameEmbeddings> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_embeddings(&bytes, path)
}

pub fn write_embeddings(path: &Path, emb: &FrameEmbeddings) -> Result<()> {
    let bytes = encode_embeddings(emb)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
