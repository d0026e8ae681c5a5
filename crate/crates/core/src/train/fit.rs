use super::teacher::TeacherForcingConfig;
use crate::error::{Error, Result};
use crate::grad::speaker_loss_and_grad;
use crate::model::{synthesize, Buffer, FeatureSequence, ModelParams, SpeakerEmbedding, SynthesisConfig};
use crate::rng;

/// Plain SGD on the speaker vector with every other tensor frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub lr: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Starting point; drawn from `U(-1/sqrt(d_s), 1/sqrt(d_s))` when absent.
    pub init: Option<Vec<f64>>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { lr: 1e-2, iterations: 200, seed: 0, init: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub z: SpeakerEmbedding,
    /// Summed loss over the samples at the returned `z`.
    pub loss: f64,
    /// Summed loss before each iteration.
    pub history: Vec<f64>,
}

/// Fits a new speaker vector to `samples`. Each iteration takes one step
/// along the gradient summed over all samples.
pub fn fit_speaker(
    params: &ModelParams,
    samples: &[(Vec<usize>, FeatureSequence)],
    cfg: &FitConfig,
    tf: &TeacherForcingConfig,
) -> Result<FitResult> {
    let d_s = params.hyper.d_s();
    if samples.is_empty() {
        return Err(Error::invalid("speaker fitting needs at least one sample"));
    }
    if !(cfg.lr.is_finite() && cfg.lr >= 0.0) {
        return Err(Error::invalid(format!("learning rate must be finite and non-negative, got {}", cfg.lr)));
    }
    let mut z = match &cfg.init {
        Some(v) if v.len() != d_s => {
            return Err(Error::invalid(format!("initial speaker vector has length {}, expected {d_s}", v.len())))
        }
        Some(v) => v.clone(),
        None => {
            let mut r = rng::seeded(rng::derive_seed(cfg.seed, &[0]));
            let a = 1.0 / (d_s as f64).sqrt();
            (0..d_s).map(|_| rng::symmetric(&mut r, a)).collect()
        }
    };

    let evaluate = |z: &[f64], iter: usize| -> Result<(f64, Vec<f64>)> {
        let emb = SpeakerEmbedding::new(z.to_vec());
        let mut loss = 0.0;
        let mut dz = vec![0.0; d_s];
        for (i, (ph, y)) in samples.iter().enumerate() {
            let seed = rng::derive_seed(cfg.seed, &[1, iter as u64, i as u64]);
            let (l, g) = speaker_loss_and_grad(params, &emb, ph, y, tf, seed)
                .map_err(|e| e.context(format_args!("fit iteration {iter}, sample {i}")))?;
            loss += l;
            dz.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        Ok((loss, dz))
    };

    let mut history = Vec::with_capacity(cfg.iterations);
    for iter in 0..cfg.iterations {
        let (loss, dz) = evaluate(&z, iter)?;
        history.push(loss);
        z.iter_mut().zip(&dz).for_each(|(v, g)| *v -= cfg.lr * g);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("fit iteration {iter}: speaker vector became non-finite")));
        }
    }
    let (loss, _) = evaluate(&z, cfg.iterations)?;
    Ok(FitResult { z: SpeakerEmbedding::new(z), loss, history })
}

/// Runs the prime sentence through the model with the usual stopping rule
/// and returns the final buffer, to be passed as the prime of a later call
/// to `synthesize`.
pub fn prime_buffer(
    params: &ModelParams,
    z: &SpeakerEmbedding,
    prime_phonemes: &[usize],
    cfg: &SynthesisConfig,
) -> Result<Buffer> {
    if prime_phonemes.is_empty() {
        return Err(Error::invalid("prime phoneme sequence is empty"));
    }
    Ok(synthesize(prime_phonemes, z, params, cfg, None)?.final_buffer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HyperParams;

    #[test]
    fn zero_iterations_returns_init() {
        let p = ModelParams::init(HyperParams::toy(), 1).unwrap();
        let y = FeatureSequence::from_rows(&vec![vec![0.1, 0.2, 0.3]; 4], 5.0).unwrap();
        let cfg = FitConfig { iterations: 0, seed: 5, ..Default::default() };
        let a = fit_speaker(&p, &[(vec![1, 2], y.clone())], &cfg, &TeacherForcingConfig::default()).unwrap();
        let b = fit_speaker(&p, &[(vec![1, 2], y)], &cfg, &TeacherForcingConfig::default()).unwrap();
        assert_eq!(a.z, b.z);
        let bound = 1.0 / 2.0;
        assert!(a.z.z.iter().all(|v| v.abs() <= bound));
        assert!(a.history.is_empty());
    }

    #[test]
    fn empty_prime_is_rejected() {
        let p = ModelParams::init(HyperParams::toy(), 1).unwrap();
        let z = SpeakerEmbedding::from_table(&p, 0).unwrap();
        assert!(matches!(prime_buffer(&p, &z, &[], &SynthesisConfig::default()), Err(Error::InvalidInput(_))));
    }
}
