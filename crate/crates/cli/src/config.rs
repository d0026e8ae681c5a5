//! Run configuration file.
//!
//! Values resolve in three layers: built-in defaults, then the TOML file
//! given with `--config`, then command-line flags. Every key is optional.
//!
//! ```toml
//! seed = 7
//! jobs = 4
//! weights = "model.vlw"
//! inventory = "phones.txt"
//! dict = "cmudict.txt"
//! manifest = "corpus/manifest.tsv"
//!
//! [model]
//! d_p = 256
//! d_o = 63
//! k = 20
//! c = 10
//! n_phonemes = 42
//! n_speakers = 22          # train defaults this to the manifest's speaker count
//! hidden_divisor = 10
//! update = "network"       # or "concat"
//! attention_pace = 5.0     # initial frames per phoneme; unset keeps the plain init
//!
//! [train]
//! optimizer = "adam"       # "sgd", "momentum" or "adam"
//! lr = 1e-4
//! epochs = 1
//! batch_size = 1
//! clip = 10.0
//! max_steps = 2000
//! checkpoint_every = 1
//! divergence_threshold = 1e6
//! beta1 = 0.9              # adam; also the momentum coefficient
//! beta2 = 0.999
//! eps = 1e-8
//! noise_std = 2.0          # teacher forcing
//! detach = false
//!
//! [synth]
//! frames_per_phoneme = 20
//! stop_margin = 1.0
//! max_frames = 400
//! frame_shift_ms = 5.0
//!
//! [fit]
//! lr = 1e-2
//! iterations = 200
//!
//! [corpus]
//! n_speakers = 2
//! n_sentences = 8
//! phonemes_per_sentence = [6, 8]
//! frames_per_phoneme = [4, 7]
//! d_o = 8
//! n_phonemes = 12
//! noise_std = 0.01
//! template_scale = 1.0
//! offset_scale = 0.5
//! duration_multipliers = [0.8, 1.2]
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use shiftbuf::data::SyntheticCorpusSpec;
use shiftbuf::model::BufferUpdate;
use shiftbuf::train::{FitConfig, Optimizer, TeacherForcingConfig, TrainConfig};
use shiftbuf::{Error, HyperParams, Result, SynthesisConfig};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub weights: Option<PathBuf>,
    pub inventory: Option<PathBuf>,
    pub dict: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub corpus: CorpusSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub d_p: Option<usize>,
    pub d_o: Option<usize>,
    pub k: Option<usize>,
    pub c: Option<usize>,
    pub n_phonemes: Option<usize>,
    pub n_speakers: Option<usize>,
    pub hidden_divisor: Option<usize>,
    pub update: Option<String>,
    pub attention_pace: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub optimizer: Option<String>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub clip: Option<f64>,
    pub max_steps: Option<u64>,
    pub checkpoint_every: Option<usize>,
    pub divergence_threshold: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
    pub noise_std: Option<f64>,
    pub detach: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub frames_per_phoneme: Option<usize>,
    pub stop_margin: Option<f64>,
    pub max_frames: Option<usize>,
    pub frame_shift_ms: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub lr: Option<f64>,
    pub iterations: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub n_speakers: Option<usize>,
    pub n_sentences: Option<usize>,
    pub phonemes_per_sentence: Option<(usize, usize)>,
    pub frames_per_phoneme: Option<(usize, usize)>,
    pub d_o: Option<usize>,
    pub n_phonemes: Option<usize>,
    pub noise_std: Option<f64>,
    pub template_scale: Option<f64>,
    pub offset_scale: Option<f64>,
    pub duration_multipliers: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn hyper(&self, base: HyperParams) -> Result<HyperParams> {
        let m = &self.model;
        let update = match m.update.as_deref() {
            None => base.update,
            Some("network") => BufferUpdate::Network,
            Some("concat") => BufferUpdate::Concat,
            Some(other) => {
                return Err(Error::InvalidInput(format!("model.update must be network or concat, got {other:?}")))
            }
        };
        let h = HyperParams {
            d_p: m.d_p.unwrap_or(base.d_p),
            d_o: m.d_o.unwrap_or(base.d_o),
            k: m.k.unwrap_or(base.k),
            c: m.c.unwrap_or(base.c),
            n_phonemes: m.n_phonemes.unwrap_or(base.n_phonemes),
            n_speakers: m.n_speakers.unwrap_or(base.n_speakers),
            hidden_divisor: m.hidden_divisor.unwrap_or(base.hidden_divisor),
            update,
        };
        h.validate()?;
        Ok(h)
    }

    /// `name` overrides `train.optimizer`; the coefficients still come from the file.
    pub fn optimizer(&self, name: Option<&str>) -> Result<Optimizer> {
        let t = &self.train;
        let opt = match name.or(t.optimizer.as_deref()).unwrap_or("adam") {
            "sgd" => Optimizer::Sgd,
            "momentum" => Optimizer::Momentum { beta: t.beta1.unwrap_or(0.9) },
            "adam" => {
                let Optimizer::Adam { beta1, beta2, eps } = Optimizer::default() else { unreachable!() };
                Optimizer::Adam {
                    beta1: t.beta1.unwrap_or(beta1),
                    beta2: t.beta2.unwrap_or(beta2),
                    eps: t.eps.unwrap_or(eps),
                }
            }
            other => {
                return Err(Error::InvalidInput(format!(
                    "train.optimizer must be sgd, momentum or adam, got {other:?}"
                )))
            }
        };
        opt.validate()?;
        Ok(opt)
    }

    pub fn train_config(&self, seed: u64, jobs: usize) -> Result<TrainConfig> {
        let t = &self.train;
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            optimizer: self.optimizer(None)?,
            lr: t.lr.unwrap_or(d.lr),
            epochs: t.epochs.unwrap_or(d.epochs),
            batch_size: t.batch_size.unwrap_or(d.batch_size),
            clip: t.clip.or(d.clip),
            max_steps: t.max_steps.or(d.max_steps),
            seed,
            checkpoint_every: t.checkpoint_every.or(d.checkpoint_every),
            jobs,
            divergence_threshold: t.divergence_threshold.unwrap_or(d.divergence_threshold),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn teacher(&self) -> Result<TeacherForcingConfig> {
        let d = TeacherForcingConfig::default();
        let tf = TeacherForcingConfig {
            noise_std: self.train.noise_std.unwrap_or(d.noise_std),
            detach: self.train.detach.unwrap_or(d.detach),
        };
        if !(tf.noise_std >= 0.0 && tf.noise_std.is_finite()) {
            return Err(Error::InvalidInput(format!("train.noise_std must be non-negative, got {}", tf.noise_std)));
        }
        Ok(tf)
    }

    pub fn synthesis(&self) -> Result<SynthesisConfig> {
        let s = &self.synth;
        let d = SynthesisConfig::default();
        let cfg = SynthesisConfig {
            frames_per_phoneme: s.frames_per_phoneme.unwrap_or(d.frames_per_phoneme),
            stop_margin: s.stop_margin.unwrap_or(d.stop_margin),
            max_frames: s.max_frames.or(d.max_frames),
            frame_shift_ms: s.frame_shift_ms.unwrap_or(d.frame_shift_ms),
        };
        if cfg.frame_cap(1) == 0 {
            return Err(Error::InvalidInput("synth frame cap must be at least 1".into()));
        }
        if cfg.frame_shift_ms.is_nan() || cfg.frame_shift_ms <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "synth.frame_shift_ms must be positive, got {}",
                cfg.frame_shift_ms
            )));
        }
        Ok(cfg)
    }

    pub fn fit(&self, seed: u64) -> FitConfig {
        let d = FitConfig::default();
        FitConfig {
            lr: self.fit.lr.unwrap_or(d.lr),
            iterations: self.fit.iterations.unwrap_or(d.iterations),
            seed,
            init: None,
        }
    }

    pub fn corpus(&self, seed: u64) -> Result<SyntheticCorpusSpec> {
        let c = &self.corpus;
        let d = SyntheticCorpusSpec::default();
        let spec = SyntheticCorpusSpec {
            n_speakers: c.n_speakers.unwrap_or(d.n_speakers),
            n_sentences: c.n_sentences.unwrap_or(d.n_sentences),
            phonemes_per_sentence: c.phonemes_per_sentence.unwrap_or(d.phonemes_per_sentence),
            frames_per_phoneme: c.frames_per_phoneme.unwrap_or(d.frames_per_phoneme),
            d_o: c.d_o.unwrap_or(d.d_o),
            n_phonemes: c.n_phonemes.unwrap_or(d.n_phonemes),
            seed,
            noise_std: c.noise_std.unwrap_or(d.noise_std),
            template_scale: c.template_scale.unwrap_or(d.template_scale),
            offset_scale: c.offset_scale.unwrap_or(d.offset_scale),
            duration_multipliers: c.duration_multipliers.clone().or(d.duration_multipliers),
            offsets: None,
            frame_shift_ms: self.synth.frame_shift_ms.unwrap_or(d.frame_shift_ms),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.hyper(HyperParams::default()).unwrap(), HyperParams::default());
        assert_eq!(c.train_config(0, 1).unwrap(), TrainConfig::default());
        assert_eq!(c.synthesis().unwrap(), SynthesisConfig::default());
        assert_eq!(c.teacher().unwrap(), TeacherForcingConfig::default());
        assert_eq!(c.corpus(0).unwrap(), SyntheticCorpusSpec::default());
    }

    #[test]
    fn sections_override_defaults() {
        let c = RunConfig::parse(
            "seed = 3\n[model]\nk = 4\nupdate = \"concat\"\n[train]\noptimizer = \"momentum\"\nbeta1 = 0.5\nlr = 0.1\n\
             [corpus]\nphonemes_per_sentence = [2, 3]\n",
        )
        .unwrap();
        assert_eq!(c.seed, Some(3));
        let h = c.hyper(HyperParams::toy()).unwrap();
        assert_eq!((h.k, h.update, h.d_p), (4, BufferUpdate::Concat, 4));
        let t = c.train_config(9, 2).unwrap();
        assert_eq!(t.optimizer, Optimizer::Momentum { beta: 0.5 });
        assert_eq!((t.lr, t.seed, t.jobs), (0.1, 9, 2));
        assert_eq!(c.corpus(0).unwrap().phonemes_per_sentence, (2, 3));
        assert_eq!(c.optimizer(Some("sgd")).unwrap(), Optimizer::Sgd);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(matches!(RunConfig::parse("[model]\nwidth = 3\n"), Err(Error::Format(_))));
        assert!(matches!(RunConfig::parse("seed = \"x\"\n"), Err(Error::Format(_))));
        let c = RunConfig::parse("[train]\noptimizer = \"rmsprop\"\n").unwrap();
        assert!(matches!(c.optimizer(None), Err(Error::InvalidInput(_))));
        let c = RunConfig::parse("[model]\nk = 0\n").unwrap();
        assert!(c.hyper(HyperParams::default()).is_err());
        let c = RunConfig::parse("[train]\nepochs = 0\n").unwrap();
        assert!(c.train_config(0, 1).is_err());
    }
}
