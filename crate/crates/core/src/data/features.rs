//! `VLF1` feature files.
//!
//! ```text
//! b"VLF1"  u32 T  u32 d_o  f32 frame_shift_ms  f32 x (T * d_o), row-major
//! ```
//!
//! Values are stored as `f32`; a sequence read from a file writes back to
//! identical bytes. Attention traces use the same container with `l`
//! columns per row.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio;
use crate::linalg::Matrix;
use crate::model::io::{read_exact, read_u32, write_u32};
use crate::model::FeatureSequence;

pub const FEATURES_MAGIC: &[u8; 4] = b"VLF1";

pub fn write_matrix(w: &mut impl Write, m: &Matrix<f64>, frame_shift_ms: f64) -> Result<()> {
    w.write_all(FEATURES_MAGIC)?;
    write_u32(w, m.rows())?;
    write_u32(w, m.cols())?;
    w.write_all(&(frame_shift_ms as f32).to_le_bytes())?;
    let mut bytes = Vec::with_capacity(m.len() * 4);
    for v in m.as_slice() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

/// Reads a matrix and its frame shift. Empty matrices are rejected.
pub fn read_matrix(r: &mut impl Read) -> Result<(Matrix<f64>, f64)> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic, "feature file magic")?;
    if &magic != FEATURES_MAGIC {
        return Err(Error::format(format!("bad feature file magic {magic:?}")));
    }
    let rows = read_u32(r)? as usize;
    let cols = read_u32(r)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::format(format!("feature file has shape {rows}x{cols}")));
    }
    let mut b = [0u8; 4];
    read_exact(r, &mut b, "frame shift")?;
    let shift = f32::from_le_bytes(b) as f64;
    let n = rows.checked_mul(cols).ok_or_else(|| Error::format("feature file shape overflows"))?;
    let mut bytes = vec![0u8; n * 4];
    read_exact(r, &mut bytes, "feature data")?;
    let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
    Ok((Matrix::from_vec(rows, cols, data), shift))
}

pub fn write_features(path: impl AsRef<Path>, seq: &FeatureSequence) -> Result<()> {
    let mut w = BufWriter::new(fsio::create(path.as_ref())?);
    write_matrix(&mut w, &seq.frames, seq.frame_shift_ms)?;
    w.flush()?;
    Ok(())
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let mut r = BufReader::new(fsio::open(path)?);
    let (m, shift) = read_matrix(&mut r).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        other => other,
    })?;
    FeatureSequence::new(m, shift).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

/// Like [`read_features`], also checking the frame width.
pub fn read_features_dim(path: impl AsRef<Path>, d_o: usize) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let seq = read_features(path)?;
    if seq.dim() != d_o {
        return Err(Error::format(format!("{}: {} features per frame, expected {d_o}", path.display(), seq.dim())));
    }
    Ok(seq)
}

pub fn write_matrix_file(path: impl AsRef<Path>, m: &Matrix<f64>, frame_shift_ms: f64) -> Result<()> {
    let mut w = BufWriter::new(fsio::create(path.as_ref())?);
    write_matrix(&mut w, m, frame_shift_ms)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_errors() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(FEATURES_MAGIC);
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&5f32.to_le_bytes());
        assert!(matches!(read_matrix(&mut bytes.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_matrix(&mut &b""[..]), Err(Error::Format(_))));
        assert!(matches!(read_matrix(&mut &b"VLW1\0\0\0\0"[..]), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_data() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let mut bytes = Vec::new();
        write_matrix(&mut bytes, &m, 5.0).unwrap();
        bytes.pop();
        assert!(matches!(read_matrix(&mut bytes.as_slice()), Err(Error::Format(_))));
    }
}
