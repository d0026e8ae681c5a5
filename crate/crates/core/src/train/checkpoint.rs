//! Checkpoints: a weight file followed by an optimizer section.
//!
//! ```text
//! <weight file>
//! b"VLO1"
//! u32       optimizer code (0 sgd, 1 momentum, 2 adam)
//! f64 x 3   beta1, beta2, eps (unused slots are zero)
//! u64       optimizer steps taken
//! u64       epochs completed
//! u32       number of moment buffers
//! f64 ...   each buffer, tensors in weight-file order
//! ```

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::optim::{Optimizer, OptimizerState};
use crate::error::{Error, Result};
use crate::fsio;
use crate::model::io::{read_exact, read_f64s, read_params, read_u32, read_u64, write_f64s, write_params, write_u32};
use crate::model::ModelParams;

pub const OPTIMIZER_MAGIC: &[u8; 4] = b"VLO1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub state: OptimizerState,
    pub epochs_done: usize,
}

pub fn write_checkpoint(w: &mut impl Write, ckpt: &Checkpoint) -> Result<()> {
    write_params(w, &ckpt.params)?;
    let st = &ckpt.state;
    w.write_all(OPTIMIZER_MAGIC)?;
    write_u32(w, st.optimizer.code() as usize)?;
    write_f64s(w, &st.optimizer.coefficients())?;
    w.write_all(&st.step.to_le_bytes())?;
    w.write_all(&(ckpt.epochs_done as u64).to_le_bytes())?;
    write_u32(w, st.moments.len())?;
    for m in &st.moments {
        for t in m.tensors() {
            write_f64s(w, t.as_slice())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<Checkpoint> {
    let params = read_params(r)?;
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic, "optimizer section magic")?;
    if &magic != OPTIMIZER_MAGIC {
        return Err(Error::format(format!("bad optimizer section magic {magic:?}")));
    }
    let code = read_u32(r)?;
    let mut coef = [0.0; 3];
    read_f64s(r, &mut coef)?;
    let optimizer = Optimizer::from_parts(code, coef)?;
    let step = read_u64(r)?;
    let epochs_done = read_u64(r)? as usize;
    let n = read_u32(r)? as usize;
    let mut state = OptimizerState::new(optimizer, &params);
    if n != state.moments.len() {
        return Err(Error::format(format!(
            "{} expects {} moment buffers, file has {n}",
            optimizer.name(),
            state.moments.len()
        )));
    }
    state.step = step;
    for m in state.moments.iter_mut() {
        for t in m.tensors_mut() {
            read_f64s(r, t.as_mut_slice())?;
        }
    }
    Ok(Checkpoint { params, state, epochs_done })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let mut w = BufWriter::new(fsio::create(path.as_ref())?);
    write_checkpoint(&mut w, ckpt)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    read_checkpoint(&mut BufReader::new(fsio::open(path.as_ref())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HyperParams;

    #[test]
    fn round_trip_with_adam_state() {
        let params = ModelParams::init(HyperParams::toy(), 2).unwrap();
        let mut state = OptimizerState::new(Optimizer::default(), &params);
        let g = ModelParams::init(HyperParams::toy(), 3).unwrap();
        let mut p = params.clone();
        state.apply(0.01, &mut p, &g);
        let ckpt = Checkpoint { params: p, state, epochs_done: 4 };
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &ckpt).unwrap();
        assert_eq!(read_checkpoint(&mut bytes.as_slice()).unwrap(), ckpt);
        // The weights alone are still readable as a weight file.
        assert_eq!(read_params(&mut bytes.as_slice()).unwrap(), ckpt.params);
    }

    #[test]
    fn weight_file_alone_is_not_a_checkpoint() {
        let params = ModelParams::init(HyperParams::toy(), 2).unwrap();
        let mut bytes = Vec::new();
        write_params(&mut bytes, &params).unwrap();
        assert!(matches!(read_checkpoint(&mut bytes.as_slice()), Err(Error::Format(_))));
    }
}
