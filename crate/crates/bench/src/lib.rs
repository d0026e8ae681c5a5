//! Fixtures shared by the benchmarks in `benches/`.

use shiftbuf::data::SyntheticCorpus;
use shiftbuf::data::SyntheticCorpusSpec;
use shiftbuf::rng;
use shiftbuf::{FeatureSequence, HyperParams, Matrix, ModelParams, SpeakerEmbedding};

/// Default-size weights in `f32`, speaker 0 and a random sentence.
pub fn full_size(seed: u64, phonemes: usize) -> (ModelParams<f32>, SpeakerEmbedding<f32>, Vec<usize>) {
    let h = HyperParams::default();
    let params = ModelParams::init(h, seed).expect("default config is valid").cast::<f32>();
    let z = SpeakerEmbedding::from_table(&params, 0).expect("speaker 0 exists");
    let mut r = rng::seeded(seed);
    let ids = (0..phonemes).map(|_| rng::int_inclusive(&mut r, 0, h.n_phonemes - 1)).collect();
    (params, z, ids)
}

/// The small model used for desk-scale training runs.
pub fn desk_hyper() -> HyperParams {
    HyperParams { d_p: 32, d_o: 8, k: 10, c: 1, n_phonemes: 12, n_speakers: 4, ..HyperParams::default() }
}

/// One synthetic utterance matching `desk_hyper`.
pub fn desk_utterance(seed: u64) -> (Vec<usize>, FeatureSequence) {
    let spec = SyntheticCorpusSpec { n_speakers: 1, n_sentences: 1, seed, ..Default::default() };
    let mut gen = SyntheticCorpus::generate(&spec).expect("default spec is valid");
    let u = gen.corpus.utterances.remove(0);
    (u.phonemes, u.features)
}

/// Random `frames x dim` sequence.
pub fn random_sequence(frames: usize, dim: usize, seed: u64) -> FeatureSequence {
    let mut r = rng::seeded(seed);
    let m = Matrix::from_fn(frames, dim, |_, _| rng::symmetric(&mut r, 1.0));
    FeatureSequence::new(m, 5.0).expect("non-empty")
}
