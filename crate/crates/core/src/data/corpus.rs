use crate::error::{Error, Result};
use crate::model::FeatureSequence;

/// One training example: a phoneme-id sequence, its speaker and its target frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub speaker: usize,
    pub phonemes: Vec<usize>,
    pub features: FeatureSequence,
}

/// Utterances with dense speaker ids in `0..n_speakers`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub utterances: Vec<Utterance>,
    pub n_speakers: usize,
}

impl Corpus {
    /// Builds a corpus, taking the speaker count as one more than the largest id.
    pub fn new(utterances: Vec<Utterance>) -> Result<Self> {
        let n_speakers = utterances.iter().map(|u| u.speaker + 1).max().unwrap_or(0);
        let c = Self { utterances, n_speakers };
        c.check_dense()?;
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.utterances.first().map(|u| u.features.dim())
    }

    pub fn by_speaker(&self, speaker: usize) -> impl Iterator<Item = &Utterance> {
        self.utterances.iter().filter(move |u| u.speaker == speaker)
    }

    /// Keeps the utterances of the listed speakers and renumbers them densely
    /// in list order.
    pub fn select_speakers(&self, speakers: &[usize]) -> Result<Corpus> {
        let mut out = Vec::new();
        for (new_id, &s) in speakers.iter().enumerate() {
            out.extend(self.by_speaker(s).cloned().map(|mut u| {
                u.speaker = new_id;
                u
            }));
        }
        let c = Corpus { utterances: out, n_speakers: speakers.len() };
        c.check_dense()?;
        Ok(c)
    }

    fn check_dense(&self) -> Result<()> {
        let mut seen = vec![false; self.n_speakers];
        for u in &self.utterances {
            if u.speaker >= self.n_speakers {
                return Err(Error::invalid(format!("speaker id {} out of range", u.speaker)));
            }
            seen[u.speaker] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("speaker ids are not dense: {missing} has no utterances")));
        }
        Ok(())
    }
}
