//! Domain types and the forward computation.

mod buffer;
mod features;
mod forward;
mod hyper;
pub mod io;
mod params;

pub use buffer::Buffer;
pub use features::{FeatureSequence, DEFAULT_FRAME_SHIFT_MS};
pub use forward::{
    attention_step, buffer_step, encode_sentence, gmm_attention, init_buffer, output_step, synthesize, AttentionDetail,
    AttentionState, AttentionStepOutput, AttentionTrace, SentenceEncoding, SpeakerEmbedding, StopReason, Synthesis,
    SynthesisConfig,
};
pub(crate) use forward::{update_input, SpeakerTerms};
pub use hyper::{BufferUpdate, HyperParams};
pub use params::{Mlp, ModelParams, TENSOR_NAMES};
