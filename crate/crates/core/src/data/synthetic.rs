//! Deterministic stand-in for a vocoder-feature corpus.
//!
//! Each phoneme has a template vector and a base duration. A speaker adds a
//! constant offset to every frame and scales all durations by a multiplier.
//! Within a phoneme segment the frames slide linearly from that phoneme's
//! template toward the next one; the last segment stays on its template.
//! Every speaker reads the same sentences.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::corpus::{Corpus, Utterance};
use super::features::write_features;
use super::manifest::{CorpusManifest, ManifestRow, PhonemeSource};
use crate::error::{Error, Result};
use crate::fsio;
use crate::linalg::Matrix;
use crate::model::{FeatureSequence, DEFAULT_FRAME_SHIFT_MS};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpusSpec {
    pub n_speakers: usize,
    /// Sentences read by every speaker.
    pub n_sentences: usize,
    /// Inclusive range of sentence lengths.
    pub phonemes_per_sentence: (usize, usize),
    /// Inclusive range the per-phoneme base durations are drawn from.
    pub frames_per_phoneme: (usize, usize),
    pub d_o: usize,
    pub n_phonemes: usize,
    pub seed: u64,
    pub noise_std: f64,
    /// Templates are drawn from `U(-template_scale, template_scale)`.
    pub template_scale: f64,
    /// Speaker offsets are drawn from `U(-offset_scale, offset_scale)`.
    pub offset_scale: f64,
    /// Multipliers are drawn from `U(0.8, 1.2)` unless given here.
    pub duration_multipliers: Option<Vec<f64>>,
    pub offsets: Option<Vec<Vec<f64>>>,
    pub frame_shift_ms: f64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        Self {
            n_speakers: 2,
            n_sentences: 8,
            phonemes_per_sentence: (6, 8),
            frames_per_phoneme: (4, 7),
            d_o: 8,
            n_phonemes: 12,
            seed: 0,
            noise_std: 0.01,
            template_scale: 1.0,
            offset_scale: 0.5,
            duration_multipliers: None,
            offsets: None,
            frame_shift_ms: DEFAULT_FRAME_SHIFT_MS,
        }
    }
}

impl SyntheticCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("synthetic corpus: {m}")));
        if self.n_speakers == 0 || self.n_sentences == 0 || self.d_o == 0 || self.n_phonemes == 0 {
            return bad("counts and dimensions must be at least 1");
        }
        let (a, b) = self.phonemes_per_sentence;
        if a == 0 || a > b {
            return bad("phonemes_per_sentence must be a non-empty range starting at 1 or more");
        }
        let (a, b) = self.frames_per_phoneme;
        if a == 0 || a > b {
            return bad("frames_per_phoneme must be a non-empty range starting at 1 or more");
        }
        if !(self.noise_std >= 0.0 && self.template_scale >= 0.0 && self.offset_scale >= 0.0) {
            return bad("scales must be non-negative");
        }
        if let Some(m) = &self.duration_multipliers {
            if m.len() != self.n_speakers || m.iter().any(|v| v.is_nan() || *v <= 0.0) {
                return bad("need one positive duration multiplier per speaker");
            }
        }
        if let Some(o) = &self.offsets {
            if o.len() != self.n_speakers || o.iter().any(|v| v.len() != self.d_o) {
                return bad("need one offset of length d_o per speaker");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerProfile {
    pub offset: Vec<f64>,
    pub duration_multiplier: f64,
}

/// The generated corpus together with the ground truth that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub spec: SyntheticCorpusSpec,
    /// `n_phonemes x d_o`, one template per row.
    pub templates: Matrix<f64>,
    pub base_durations: Vec<usize>,
    pub speakers: Vec<SpeakerProfile>,
    pub sentences: Vec<Vec<usize>>,
    pub corpus: Corpus,
}

/// Rounds through `f32` so in-memory frames match what a feature file stores.
fn f32_exact(v: f64) -> f64 {
    v as f32 as f64
}

impl SyntheticCorpus {
    pub fn generate(spec: &SyntheticCorpusSpec) -> Result<Self> {
        spec.validate()?;
        let mut r = rng::seeded(rng::derive_seed(spec.seed, &[0]));
        let templates = Matrix::from_fn(spec.n_phonemes, spec.d_o, |_, _| rng::symmetric(&mut r, spec.template_scale));
        let (lo, hi) = spec.frames_per_phoneme;
        let base_durations = (0..spec.n_phonemes).map(|_| rng::int_inclusive(&mut r, lo, hi)).collect();

        let mut r = rng::seeded(rng::derive_seed(spec.seed, &[1]));
        let speakers = (0..spec.n_speakers)
            .map(|s| {
                let offset = match &spec.offsets {
                    Some(o) => o[s].clone(),
                    None => (0..spec.d_o).map(|_| rng::symmetric(&mut r, spec.offset_scale)).collect(),
                };
                let duration_multiplier = match &spec.duration_multipliers {
                    Some(m) => m[s],
                    None => rng::range(&mut r, 0.8, 1.2),
                };
                SpeakerProfile { offset, duration_multiplier }
            })
            .collect();

        let mut r = rng::seeded(rng::derive_seed(spec.seed, &[2]));
        let (lo, hi) = spec.phonemes_per_sentence;
        let sentences = (0..spec.n_sentences)
            .map(|_| {
                let l = rng::int_inclusive(&mut r, lo, hi);
                (0..l).map(|_| rng::int_inclusive(&mut r, 0, spec.n_phonemes - 1)).collect()
            })
            .collect();

        let mut out =
            Self { spec: spec.clone(), templates, base_durations, speakers, sentences, corpus: Corpus::default() };
        let mut utterances = Vec::with_capacity(spec.n_speakers * spec.n_sentences);
        for s in 0..spec.n_speakers {
            for (i, ph) in out.sentences.iter().enumerate() {
                let seed = rng::derive_seed(spec.seed, &[3, s as u64, i as u64]);
                utterances.push(Utterance {
                    id: format!("s{s:02}_u{i:03}"),
                    speaker: s,
                    phonemes: ph.clone(),
                    features: out.render(ph, s, seed)?,
                });
            }
        }
        out.corpus = Corpus::new(utterances)?;
        Ok(out)
    }

    /// Frames per phoneme for a speaker: `max(1, round(base * multiplier))`.
    pub fn durations(&self, phonemes: &[usize], speaker: usize) -> Vec<usize> {
        let m = self.speakers[speaker].duration_multiplier;
        phonemes.iter().map(|&p| ((self.base_durations[p] as f64 * m).round() as usize).max(1)).collect()
    }

    /// Renders any phoneme sequence for one of the speakers, with noise drawn
    /// from `noise_seed`.
    pub fn render(&self, phonemes: &[usize], speaker: usize, noise_seed: u64) -> Result<FeatureSequence> {
        if phonemes.is_empty() {
            return Err(Error::invalid("cannot render an empty phoneme sequence"));
        }
        if let Some(&p) = phonemes.iter().find(|&&p| p >= self.spec.n_phonemes) {
            return Err(Error::invalid(format!("phoneme {p} outside the synthetic inventory")));
        }
        if speaker >= self.speakers.len() {
            return Err(Error::invalid(format!("speaker {speaker} does not exist")));
        }
        let d_o = self.spec.d_o;
        let offset = &self.speakers[speaker].offset;
        let mut noise = rng::seeded(noise_seed);
        let mut rows = Vec::new();
        for (i, (&p, n)) in phonemes.iter().zip(self.durations(phonemes, speaker)).enumerate() {
            let next = phonemes.get(i + 1).copied().unwrap_or(p);
            for f in 0..n {
                let w = f as f64 / n as f64;
                let row: Vec<f64> = (0..d_o)
                    .map(|c| {
                        let clean = (1.0 - w) * self.templates.get(p, c) + w * self.templates.get(next, c) + offset[c];
                        let eps =
                            if self.spec.noise_std > 0.0 { self.spec.noise_std * rng::normal(&mut noise) } else { 0.0 };
                        f32_exact(clean + eps)
                    })
                    .collect();
                rows.push(row);
            }
        }
        FeatureSequence::from_rows(&rows, self.spec.frame_shift_ms)
    }

    /// Writes `features/<id>.vlf`, `manifest.tsv` and `speakers.tsv` under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<CorpusManifest> {
        let dir = dir.as_ref();
        fsio::create_dir_all(&dir.join("features"))?;
        let mut rows = Vec::with_capacity(self.corpus.len());
        for u in &self.corpus.utterances {
            let rel = PathBuf::from("features").join(format!("{}.vlf", u.id));
            write_features(dir.join(&rel), &u.features)?;
            rows.push(ManifestRow {
                utterance_id: u.id.clone(),
                speaker_id: u.speaker,
                phonemes: PhonemeSource::Inline(u.phonemes.clone()),
                features: rel,
            });
        }
        let manifest = CorpusManifest { rows, base_dir: dir.to_path_buf() };
        manifest.write(dir.join("manifest.tsv"))?;
        fsio::write(&dir.join("speakers.tsv"), self.speakers_tsv())?;
        Ok(manifest)
    }

    pub fn speakers_tsv(&self) -> String {
        let mut s = String::from("speaker_id\tduration_multiplier\toffset\n");
        for (i, p) in self.speakers.iter().enumerate() {
            let off: Vec<String> = p.offset.iter().map(|v| format!("{v:.9}")).collect();
            let _ = writeln!(s, "{i}\t{:.9}\t{}", p.duration_multiplier, off.join(" "));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_single_phoneme_segment_is_constant() {
        let spec = SyntheticCorpusSpec {
            noise_std: 0.0,
            frames_per_phoneme: (4, 4),
            duration_multipliers: Some(vec![1.0, 1.0]),
            ..Default::default()
        };
        let c = SyntheticCorpus::generate(&spec).unwrap();
        let seq = c.render(&[3], 1, 0).unwrap();
        assert_eq!(seq.len(), 4);
        for t in 0..4 {
            for j in 0..spec.d_o {
                let expected = f32_exact(c.templates.get(3, j) + c.speakers[1].offset[j]);
                assert_eq!(seq.frame(t)[j], expected);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticCorpusSpec { seed: 9, ..Default::default() };
        assert_eq!(SyntheticCorpus::generate(&spec).unwrap(), SyntheticCorpus::generate(&spec).unwrap());
        let other = SyntheticCorpusSpec { seed: 10, ..Default::default() };
        assert_ne!(SyntheticCorpus::generate(&spec).unwrap(), SyntheticCorpus::generate(&other).unwrap());
    }

    #[test]
    fn durations_scale_with_multiplier() {
        let spec = SyntheticCorpusSpec { duration_multipliers: Some(vec![0.8, 1.2]), ..Default::default() };
        let c = SyntheticCorpus::generate(&spec).unwrap();
        for ph in &c.sentences {
            let short: usize = c.durations(ph, 0).iter().sum();
            let long: usize = c.durations(ph, 1).iter().sum();
            assert!(short < long);
        }
    }

    #[test]
    fn rejects_bad_spec() {
        let spec = SyntheticCorpusSpec { frames_per_phoneme: (0, 3), ..Default::default() };
        assert!(SyntheticCorpus::generate(&spec).is_err());
        let spec = SyntheticCorpusSpec { duration_multipliers: Some(vec![1.0]), ..Default::default() };
        assert!(SyntheticCorpus::generate(&spec).is_err());
    }
}
