//! Binary weight files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"VLW1"
//! u32 x 8   d_p, d_o, k, c, n_phonemes, n_speakers, hidden_divisor, update mode
//! f64 ...   lut_p, lut_s, f_u, f_o, n_a.{w1,b1,w2,b2}, n_u.{..}, n_o.{..}
//! ```
//!
//! Each tensor is written row-major with the shape implied by the header.
//! Checkpoints append an optimizer section after the tensors.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::hyper::{BufferUpdate, HyperParams};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::fsio;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"VLW1";

pub fn write_params(w: &mut impl Write, params: &ModelParams) -> Result<()> {
    let h = &params.hyper;
    w.write_all(WEIGHTS_MAGIC)?;
    for v in [h.d_p, h.d_o, h.k, h.c, h.n_phonemes, h.n_speakers, h.hidden_divisor] {
        write_u32(w, v)?;
    }
    w.write_all(&h.update.code().to_le_bytes())?;
    for t in params.tensors() {
        write_f64s(w, t.as_slice())?;
    }
    Ok(())
}

pub fn read_params(r: &mut impl Read) -> Result<ModelParams> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic, "weight file magic")?;
    if &magic != WEIGHTS_MAGIC {
        return Err(Error::format(format!("bad weight file magic {magic:?}")));
    }
    let mut dims = [0usize; 7];
    for d in dims.iter_mut() {
        *d = read_u32(r)? as usize;
    }
    let update = BufferUpdate::from_code(read_u32(r)?)?;
    let hyper = HyperParams {
        d_p: dims[0],
        d_o: dims[1],
        k: dims[2],
        c: dims[3],
        n_phonemes: dims[4],
        n_speakers: dims[5],
        hidden_divisor: dims[6],
        update,
    };
    hyper.validate().map_err(|e| Error::format(format!("weight header: {e}")))?;
    let mut params = ModelParams::zeros(hyper)?;
    for t in params.tensors_mut() {
        read_f64s(r, t.as_mut_slice())?;
    }
    Ok(params)
}

pub fn save_weights(path: impl AsRef<Path>, params: &ModelParams) -> Result<()> {
    let mut w = BufWriter::new(fsio::create(path.as_ref())?);
    write_params(&mut w, params)?;
    w.flush()?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<ModelParams> {
    let mut r = BufReader::new(fsio::open(path.as_ref())?);
    read_params(&mut r)
}

pub(crate) fn write_u32(w: &mut impl Write, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::invalid(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn write_f64s(w: &mut impl Write, data: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

pub(crate) fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::format(format!("truncated file while reading {what}")),
        _ => Error::Io(e),
    })
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, "header")?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, "header")?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64s(r: &mut impl Read, out: &mut [f64]) -> Result<()> {
    let mut bytes = vec![0u8; out.len() * 8];
    read_exact(r, &mut bytes, "tensor data")?;
    for (v, chunk) in out.iter_mut().zip(bytes.chunks_exact(8)) {
        *v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let h = HyperParams { update: BufferUpdate::Concat, ..HyperParams::toy() };
        let p = ModelParams::init(h, 5).unwrap();
        let mut buf = Vec::new();
        write_params(&mut buf, &p).unwrap();
        assert_eq!(&buf[..4], b"VLW1");
        assert_eq!(buf.len(), 4 + 32 + 8 * p.param_count());
        let q = read_params(&mut buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn truncated_and_bad_magic() {
        let p = ModelParams::init(HyperParams::toy(), 5).unwrap();
        let mut buf = Vec::new();
        write_params(&mut buf, &p).unwrap();
        let cut = &buf[..buf.len() - 3];
        assert!(matches!(read_params(&mut &cut[..]), Err(Error::Format(_))));
        buf[0] = b'X';
        assert!(matches!(read_params(&mut buf.as_slice()), Err(Error::Format(_))));
        assert!(matches!(read_params(&mut &[][..]), Err(Error::Format(_))));
    }
}
