//! Tab-separated corpus manifests.
//!
//! ```text
//! utterance_id  speaker_id  phonemes         features
//! p001_001      0           41 12 7 3 41     feats/p001_001.vlf
//! p001_002      0           file:ph/2.txt    feats/p001_002.vlf
//! ```
//!
//! The phoneme column holds space-separated ids, or `file:` followed by the
//! path of a file holding whitespace-separated ids. Relative paths are
//! resolved against the manifest's directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::corpus::{Corpus, Utterance};
use super::features::read_features;
use crate::error::{Error, Result};
use crate::fsio;

pub const MANIFEST_HEADER: [&str; 4] = ["utterance_id", "speaker_id", "phonemes", "features"];

#[derive(Debug, Clone, PartialEq)]
pub enum PhonemeSource {
    Inline(Vec<usize>),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub utterance_id: String,
    pub speaker_id: usize,
    pub phonemes: PhonemeSource,
    pub features: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub rows: Vec<ManifestRow>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

fn parse_ids(s: &str, what: &str) -> Result<Vec<usize>> {
    let ids = s
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| Error::format(format!("{what}: bad phoneme id {t:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if ids.is_empty() {
        return Err(Error::format(format!("{what}: empty phoneme sequence")));
    }
    Ok(ids)
}

impl CorpusManifest {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::format("manifest is empty"))?;
        let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
        if cols != MANIFEST_HEADER {
            return Err(Error::format(format!("manifest header must be {:?}, got {cols:?}", MANIFEST_HEADER)));
        }
        let mut rows = Vec::new();
        for (n, line) in lines {
            let what = format!("manifest line {}", n + 1);
            let f: Vec<&str> = line.split('\t').map(str::trim).collect();
            if f.len() != 4 {
                return Err(Error::format(format!("{what}: expected 4 fields, got {}", f.len())));
            }
            let speaker_id = f[1].parse().map_err(|_| Error::format(format!("{what}: bad speaker id {:?}", f[1])))?;
            let phonemes = match f[2].strip_prefix("file:") {
                Some(p) => PhonemeSource::File(PathBuf::from(p)),
                None => PhonemeSource::Inline(parse_ids(f[2], &what)?),
            };
            rows.push(ManifestRow {
                utterance_id: f[0].to_string(),
                speaker_id,
                phonemes,
                features: PathBuf::from(f[3]),
            });
        }
        Ok(Self { rows, base_dir: base_dir.into() })
    }

    /// Reads and validates a manifest: referenced files must exist and speaker ids must be dense.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fsio::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Self::parse(&text, base)?;
        m.validate()?;
        Ok(m)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn n_speakers(&self) -> usize {
        self.rows.iter().map(|r| r.speaker_id + 1).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::format("manifest has no utterances"));
        }
        let mut seen = vec![false; self.n_speakers()];
        for r in &self.rows {
            seen[r.speaker_id] = true;
            let mut files = vec![&r.features];
            if let PhonemeSource::File(p) = &r.phonemes {
                files.push(p);
            }
            for f in files {
                let full = self.resolve(f);
                if !full.is_file() {
                    return Err(Error::format(format!("{}: missing file {}", r.utterance_id, full.display())));
                }
            }
        }
        if let Some(s) = seen.iter().position(|s| !s) {
            return Err(Error::format(format!("speaker ids are not dense: {s} has no utterances")));
        }
        Ok(())
    }

    pub fn phonemes(&self, row: &ManifestRow) -> Result<Vec<usize>> {
        match &row.phonemes {
            PhonemeSource::Inline(ids) => Ok(ids.clone()),
            PhonemeSource::File(p) => {
                let full = self.resolve(p);
                parse_ids(&fsio::read_to_string(&full)?, &full.display().to_string())
            }
        }
    }

    /// Loads every utterance's phonemes and features.
    pub fn load_corpus(&self) -> Result<Corpus> {
        let mut utterances = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            utterances.push(Utterance {
                id: r.utterance_id.clone(),
                speaker: r.speaker_id,
                phonemes: self.phonemes(r)?,
                features: read_features(self.resolve(&r.features))?,
            });
        }
        Corpus::new(utterances).map_err(|e| Error::format(e.to_string()))
    }

    pub fn to_tsv(&self) -> String {
        let mut s = MANIFEST_HEADER.join("\t");
        s.push('\n');
        for r in &self.rows {
            let ph = match &r.phonemes {
                PhonemeSource::Inline(ids) => ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "),
                PhonemeSource::File(p) => format!("file:{}", p.display()),
            };
            let _ = writeln!(s, "{}\t{}\t{}\t{}", r.utterance_id, r.speaker_id, ph, r.features.display());
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fsio::write(path.as_ref(), self.to_tsv())?;
        Ok(())
    }
}
