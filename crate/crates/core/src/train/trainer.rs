use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::optim::{Optimizer, OptimizerState};
use super::teacher::TeacherForcingConfig;
use crate::data::{Corpus, Utterance};
use crate::error::{Error, Result};
use crate::fsio;
use crate::grad::{sequence_loss_and_grads, Gradients};
use crate::model::{ModelParams, SpeakerEmbedding};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub lr: f64,
    pub epochs: usize,
    /// Utterances per optimizer step. The batch gradient is the sum, not the mean.
    pub batch_size: usize,
    /// Optional cap on the global gradient norm.
    pub clip: Option<f64>,
    /// Stop after this many optimizer steps even if epochs remain.
    pub max_steps: Option<u64>,
    pub seed: u64,
    /// Epochs between checkpoints, used by callers that save them.
    pub checkpoint_every: Option<usize>,
    /// Worker threads for per-utterance gradients. 1 runs inline.
    pub jobs: usize,
    pub divergence_threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::default(),
            lr: 1e-4,
            epochs: 1,
            batch_size: 1,
            clip: None,
            max_steps: None,
            seed: 0,
            checkpoint_every: None,
            jobs: 1,
            divergence_threshold: 1e6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::invalid(format!("learning rate must be finite and non-negative, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.jobs == 0 {
            return Err(Error::invalid("jobs must be at least 1"));
        }
        if let Some(c) = self.clip {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::invalid(format!("clip norm must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Optimizer steps taken so far, across all epochs.
    pub steps: u64,
    pub mean_loss: f64,
    pub wall_secs: f64,
    pub param_norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainLog {
    pub fn last_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("epoch\tsteps\tmean_loss\twall_secs\tparam_norm\n");
        for e in &self.epochs {
            let _ =
                writeln!(s, "{}\t{}\t{:.9e}\t{:.3}\t{:.9e}", e.epoch, e.steps, e.mean_loss, e.wall_secs, e.param_norm);
        }
        s
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        fsio::write(path.as_ref(), self.to_tsv())?;
        Ok(())
    }
}

/// Stateful training driver. `train` wraps it for the one-shot case; the CLI
/// uses it directly to checkpoint between epochs.
#[derive(Debug)]
pub struct Trainer {
    params: ModelParams,
    cfg: TrainConfig,
    tf: TeacherForcingConfig,
    state: OptimizerState,
    epochs_done: usize,
    log: TrainLog,
    pool: Option<rayon::ThreadPool>,
}

impl Trainer {
    pub fn new(params: ModelParams, cfg: TrainConfig, tf: TeacherForcingConfig) -> Result<Self> {
        let state = OptimizerState::new(cfg.optimizer, &params);
        Self::resume(params, state, 0, cfg, tf)
    }

    /// Continues from saved optimizer state; `epochs_done` numbers the next epoch.
    pub fn resume(
        params: ModelParams,
        state: OptimizerState,
        epochs_done: usize,
        cfg: TrainConfig,
        tf: TeacherForcingConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        params.check_shapes()?;
        if state.optimizer != cfg.optimizer {
            return Err(Error::invalid(format!(
                "checkpoint optimizer {} does not match configured {}",
                state.optimizer.name(),
                cfg.optimizer.name()
            )));
        }
        let pool = if cfg.jobs > 1 {
            let p = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.jobs)
                .build()
                .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
            Some(p)
        } else {
            None
        };
        Ok(Self { params, cfg, tf, state, epochs_done, log: TrainLog::default(), pool })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    fn steps_exhausted(&self) -> bool {
        self.cfg.max_steps.is_some_and(|m| self.state.step >= m)
    }

    pub fn is_finished(&self) -> bool {
        self.epochs_done >= self.cfg.epochs || self.steps_exhausted()
    }

    /// Loss and gradients of each utterance, in the given order.
    fn batch(&self, batch: &[(usize, &Utterance)], epoch: usize) -> Vec<Result<(f64, Gradients)>> {
        let one = |&(pos, u): &(usize, &Utterance)| -> Result<(f64, Gradients)> {
            let z = SpeakerEmbedding::from_table(&self.params, u.speaker)?;
            let seed = rng::derive_seed(self.cfg.seed, &[epoch as u64, pos as u64]);
            sequence_loss_and_grads(&self.params, &z, &u.phonemes, &u.features, &self.tf, seed)
        };
        match &self.pool {
            Some(pool) => pool.install(|| batch.par_iter().map(one).collect()),
            None => batch.iter().map(one).collect(),
        }
    }

    pub fn run_epoch(&mut self, corpus: &Corpus) -> Result<EpochRecord> {
        check_corpus(&self.params, corpus)?;
        let start = Instant::now();
        let epoch = self.epochs_done;
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        rng::shuffle(&mut rng::seeded(rng::derive_seed(self.cfg.seed, &[epoch as u64, u64::MAX])), &mut order);
        let visit: Vec<(usize, &Utterance)> =
            order.iter().enumerate().map(|(p, &i)| (p, &corpus.utterances[i])).collect();

        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for chunk in visit.chunks(self.cfg.batch_size) {
            if self.steps_exhausted() {
                break;
            }
            let mut total = Gradients::zeros(&self.params);
            for ((_, u), r) in chunk.iter().zip(self.batch(chunk, epoch)) {
                let ctx = format_args!("epoch {epoch}, utterance {}", u.id);
                let (loss, g) = r.map_err(|e| e.context(ctx))?;
                if loss.is_nan() || loss > self.cfg.divergence_threshold {
                    return Err(Error::Divergence(format!("epoch {epoch}, utterance {}: loss {loss:e}", u.id)));
                }
                loss_sum += loss;
                seen += 1;
                total.add_assign(&g);
            }
            if let Some(max) = self.cfg.clip {
                let n = total.norm();
                if n > max {
                    total.scale(max / n);
                }
            }
            self.state.apply(self.cfg.lr, &mut self.params, &total.params);
            if !self.params.is_finite() {
                return Err(Error::numerical(format!("epoch {epoch}: parameters became non-finite")));
            }
        }
        self.epochs_done += 1;
        let rec = EpochRecord {
            epoch,
            steps: self.state.step,
            mean_loss: if seen > 0 { loss_sum / seen as f64 } else { f64::NAN },
            wall_secs: start.elapsed().as_secs_f64(),
            param_norm: self.params.norm(),
        };
        self.log.epochs.push(rec.clone());
        Ok(rec)
    }

    /// Runs the remaining epochs, calling `after_epoch` after each one.
    pub fn run(&mut self, corpus: &Corpus, mut after_epoch: impl FnMut(&Trainer) -> Result<()>) -> Result<()> {
        while !self.is_finished() {
            self.run_epoch(corpus)?;
            after_epoch(self)?;
        }
        Ok(())
    }

    pub fn into_parts(self) -> (ModelParams, TrainLog, OptimizerState) {
        (self.params, self.log, self.state)
    }
}

fn check_corpus(params: &ModelParams, corpus: &Corpus) -> Result<()> {
    let h = &params.hyper;
    if corpus.is_empty() {
        return Err(Error::invalid("training corpus is empty"));
    }
    for u in &corpus.utterances {
        if u.speaker >= h.n_speakers {
            return Err(Error::invalid(format!(
                "utterance {}: speaker {} but the model has {} speakers",
                u.id, u.speaker, h.n_speakers
            )));
        }
        if u.features.dim() != h.d_o {
            return Err(Error::invalid(format!(
                "utterance {}: {} features per frame, model expects {}",
                u.id,
                u.features.dim(),
                h.d_o
            )));
        }
    }
    Ok(())
}

/// Trains for `cfg.epochs` epochs (or `cfg.max_steps` steps) and returns the
/// updated parameters with one log row per epoch.
pub fn train(
    params: &ModelParams,
    corpus: &Corpus,
    cfg: &TrainConfig,
    tf: &TeacherForcingConfig,
) -> Result<(ModelParams, TrainLog)> {
    let mut t = Trainer::new(params.clone(), cfg.clone(), *tf)?;
    t.run(corpus, |_| Ok(()))?;
    let (p, log, _) = t.into_parts();
    Ok((p, log))
}
