use std::time::Instant;

use crate::error::Result;
use crate::model::{synthesize, HyperParams, ModelParams, SpeakerEmbedding, SynthesisConfig};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceBenchmark {
    pub param_count: usize,
    pub phonemes: usize,
    pub frames: usize,
    pub seconds: f64,
    pub frames_per_sec: f64,
    /// Generated audio duration over wall time, at `frame_shift_ms` per frame.
    pub real_time_factor: f64,
}

/// Times single-threaded `f32` synthesis of `n_frames` frames from a random
/// `n_phonemes`-long input with freshly initialised weights. The stopping
/// rule is disabled so the frame count is fixed.
pub fn benchmark_inference(
    hyper: HyperParams,
    seed: u64,
    n_phonemes: usize,
    n_frames: usize,
    frame_shift_ms: f64,
) -> Result<InferenceBenchmark> {
    let params64 = ModelParams::init(hyper, seed)?;
    let param_count = params64.param_count();
    let params = params64.cast::<f32>();
    drop(params64);
    let z = SpeakerEmbedding::<f32>::from_table(&params, 0)?;
    let mut r = rng::seeded(rng::derive_seed(seed, &[7]));
    let phonemes: Vec<usize> = (0..n_phonemes).map(|_| rng::int_inclusive(&mut r, 0, hyper.n_phonemes - 1)).collect();
    let cfg = SynthesisConfig {
        max_frames: Some(n_frames),
        stop_margin: f64::INFINITY,
        frame_shift_ms,
        ..Default::default()
    };
    let start = Instant::now();
    let out = synthesize(&phonemes, &z, &params, &cfg, None)?;
    let seconds = start.elapsed().as_secs_f64();
    let frames = out.features.len();
    let frames_per_sec = frames as f64 / seconds;
    Ok(InferenceBenchmark {
        param_count,
        phonemes: n_phonemes,
        frames,
        seconds,
        frames_per_sec,
        real_time_factor: frames_per_sec * frame_shift_ms / 1000.0,
    })
}
