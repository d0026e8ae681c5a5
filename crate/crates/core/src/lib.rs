//! Shifting-buffer sequence synthesis.
//!
//! A phoneme sequence is read through a monotone Gaussian-mixture attention;
//! a `d x k` FIFO buffer of learned representations drives the attention,
//! its own update and the per-frame output. The crate provides the forward
//! pass, exact gradients of the unrolled sequence loss, training with noisy
//! teacher forcing, speaker fitting, priming, and evaluation tools.

pub mod data;
pub mod error;
pub mod eval;
mod fsio;
pub mod grad;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use linalg::{Matrix, Real};
pub use model::{
    synthesize, Buffer, BufferUpdate, FeatureSequence, HyperParams, ModelParams, SpeakerEmbedding, Synthesis,
    SynthesisConfig,
};
