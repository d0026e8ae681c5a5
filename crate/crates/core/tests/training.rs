use shiftbuf::data::{Corpus, Utterance};
use shiftbuf::grad::{sequence_loss, ToyProblem};
use shiftbuf::model::{synthesize, FeatureSequence, HyperParams, ModelParams, SpeakerEmbedding, SynthesisConfig};
use shiftbuf::rng;
use shiftbuf::train::{
    fit_speaker, read_checkpoint, train, write_checkpoint, Checkpoint, FitConfig, Optimizer, TeacherForcingConfig,
    TrainConfig, Trainer,
};
use shiftbuf::Matrix;

fn target(frames: usize, d_o: usize, seed: u64) -> FeatureSequence {
    let mut r = rng::seeded(seed);
    let m = Matrix::from_fn(frames, d_o, |_, _| rng::symmetric(&mut r, 1.0));
    FeatureSequence::new(m, 5.0).unwrap()
}

fn toy_corpus(n: usize) -> Corpus {
    let h = HyperParams::toy();
    let utts = (0..n)
        .map(|i| Utterance {
            id: format!("u{i}"),
            speaker: i % h.n_speakers,
            phonemes: (0..4).map(|j| (i * 3 + j) % h.n_phonemes).collect(),
            features: target(12, h.d_o, i as u64),
        })
        .collect();
    Corpus::new(utts).unwrap()
}

fn toy_params(seed: u64) -> ModelParams {
    ModelParams::init(HyperParams::toy(), seed).unwrap()
}

fn loss_of(p: &ModelParams, u: &Utterance, tf: &TeacherForcingConfig) -> f64 {
    let z = SpeakerEmbedding::from_table(p, u.speaker).unwrap();
    sequence_loss(p, &z, &u.phonemes, &u.features, tf, 99).unwrap()
}

#[test]
fn zero_learning_rate_leaves_weights_untouched() {
    let p = toy_params(3);
    for optimizer in [Optimizer::Sgd, Optimizer::default(), Optimizer::Momentum { beta: 0.9 }] {
        let cfg = TrainConfig { optimizer, lr: 0.0, epochs: 2, batch_size: 2, ..Default::default() };
        let (q, log) = train(&p, &toy_corpus(4), &cfg, &TeacherForcingConfig::default()).unwrap();
        assert_eq!(q, p);
        assert_eq!(log.epochs.len(), 2);
    }
}

#[test]
fn single_utterance_overfits_in_500_steps() {
    let h = HyperParams::toy();
    let teacher = ToyProblem::new(h, 101).unwrap();
    let cfg =
        SynthesisConfig { max_frames: Some(ToyProblem::FRAMES), stop_margin: f64::INFINITY, ..Default::default() };
    let y = synthesize(&teacher.phonemes, &teacher.z, &teacher.params, &cfg, None).unwrap().features;
    let u = Utterance { id: "only".into(), speaker: 0, phonemes: teacher.phonemes.clone(), features: y };
    let corpus = Corpus::new(vec![u.clone()]).unwrap();
    let p = toy_params(1);
    let tf = TeacherForcingConfig::default();
    let before = loss_of(&p, &u, &tf);
    let cfg = TrainConfig { lr: 1e-2, epochs: 500, seed: 1, ..Default::default() };
    let (q, log) = train(&p, &corpus, &cfg, &tf).unwrap();
    let after = loss_of(&q, &u, &tf);
    assert_eq!(log.epochs.last().unwrap().steps, 500);
    assert!(after < 0.05 * before, "loss {before} -> {after}");
}

#[test]
fn identical_runs_are_bitwise_identical() {
    let corpus = toy_corpus(5);
    let cfg = TrainConfig { lr: 1e-3, epochs: 3, batch_size: 2, seed: 11, ..Default::default() };
    let tf = TeacherForcingConfig::default();
    let (a, la) = train(&toy_params(2), &corpus, &cfg, &tf).unwrap();
    let (b, lb) = train(&toy_params(2), &corpus, &cfg, &tf).unwrap();
    assert_eq!(a, b);
    let strip = |l: &shiftbuf::train::TrainLog| {
        l.epochs.iter().map(|e| (e.steps, e.mean_loss, e.param_norm)).collect::<Vec<_>>()
    };
    assert_eq!(strip(&la), strip(&lb));
}

#[test]
fn worker_pool_matches_inline_run() {
    let corpus = toy_corpus(6);
    let tf = TeacherForcingConfig::default();
    let base = TrainConfig { lr: 1e-3, epochs: 2, batch_size: 3, seed: 4, ..Default::default() };
    let (a, _) = train(&toy_params(5), &corpus, &base, &tf).unwrap();
    let (b, _) = train(&toy_params(5), &corpus, &TrainConfig { jobs: 3, ..base }, &tf).unwrap();
    assert_eq!(a, b);
}

#[test]
fn resumed_training_matches_uninterrupted_run() {
    let corpus = toy_corpus(4);
    let tf = TeacherForcingConfig::default();
    let cfg = TrainConfig { lr: 1e-3, epochs: 4, seed: 8, ..Default::default() };
    let (straight, _) = train(&toy_params(9), &corpus, &cfg, &tf).unwrap();

    let mut first = Trainer::new(toy_params(9), TrainConfig { epochs: 2, ..cfg.clone() }, tf).unwrap();
    first.run(&corpus, |_| Ok(())).unwrap();
    let epochs_done = first.epochs_done();
    let (params, _, state) = first.into_parts();
    let mut bytes = Vec::new();
    write_checkpoint(&mut bytes, &Checkpoint { params, state, epochs_done }).unwrap();
    let ck = read_checkpoint(&mut bytes.as_slice()).unwrap();

    let mut second = Trainer::resume(ck.params, ck.state, ck.epochs_done, cfg, tf).unwrap();
    second.run(&corpus, |_| Ok(())).unwrap();
    assert_eq!(second.epochs_done(), 4);
    assert_eq!(second.params(), &straight);
}

#[test]
fn max_steps_stops_mid_epoch() {
    let cfg = TrainConfig { lr: 1e-3, epochs: 10, max_steps: Some(3), ..Default::default() };
    let (_, log) = train(&toy_params(1), &toy_corpus(5), &cfg, &TeacherForcingConfig::default()).unwrap();
    assert_eq!(log.epochs.len(), 1);
    assert_eq!(log.epochs[0].steps, 3);
}

#[test]
fn divergence_is_reported() {
    let cfg = TrainConfig { divergence_threshold: 0.0, ..Default::default() };
    let err = train(&toy_params(1), &toy_corpus(2), &cfg, &TeacherForcingConfig::default()).unwrap_err();
    assert!(matches!(err, shiftbuf::Error::Divergence(_)), "{err}");
}

fn own_samples(p: &ModelParams, z: &SpeakerEmbedding, n: usize) -> Vec<(Vec<usize>, FeatureSequence)> {
    let cfg = SynthesisConfig { max_frames: Some(10), stop_margin: f64::INFINITY, ..Default::default() };
    (0..n)
        .map(|i| {
            let ph: Vec<usize> = (0..3).map(|j| (i + 2 * j) % p.hyper.n_phonemes).collect();
            let y = synthesize(&ph, z, p, &cfg, None).unwrap().features;
            assert_eq!(y.len(), 10);
            (ph, y)
        })
        .collect()
}

#[test]
fn fitting_from_the_generating_vector_stays_put() {
    let p = toy_params(12);
    let z_star: Vec<f64> = (0..p.hyper.d_s()).map(|i| 0.3 * (i as f64 + 1.0).sin()).collect();
    let samples = own_samples(&p, &SpeakerEmbedding::new(z_star.clone()), 2);
    let cfg = FitConfig { lr: 0.1, iterations: 20, init: Some(z_star.clone()), ..Default::default() };
    let r = fit_speaker(&p, &samples, &cfg, &TeacherForcingConfig::noiseless()).unwrap();
    let moved = r.z.z.iter().zip(&z_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(moved < 1e-6, "z moved by {moved}");
    assert!(r.loss < 1e-20, "loss {}", r.loss);
}

#[test]
fn fitting_leaves_the_model_frozen_and_lowers_loss() {
    let p = toy_params(13);
    let before = p.clone();
    let z_star: Vec<f64> = (0..p.hyper.d_s()).map(|i| 0.5 * (i as f64 * 1.7).cos()).collect();
    let samples = own_samples(&p, &SpeakerEmbedding::new(z_star), 2);
    let cfg = FitConfig { lr: 0.05, iterations: 60, seed: 3, ..Default::default() };
    let r = fit_speaker(&p, &samples, &cfg, &TeacherForcingConfig::noiseless()).unwrap();
    assert_eq!(p, before);
    assert_eq!(r.history.len(), 60);
    assert!(r.loss < r.history[0], "{} -> {}", r.history[0], r.loss);
}
