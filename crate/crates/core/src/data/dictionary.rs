use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio;

/// Word to phoneme-symbol table in the CMU pronouncing dictionary format.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dictionary {
    entries: HashMap<String, Vec<String>>,
}

impl Dictionary {
    /// Parses `WORD PH1 PH2 ...` lines. Lines starting with `;;;` are
    /// comments and alternate pronunciations (`WORD(2)`) are ignored. Words
    /// are stored lowercase; phoneme symbols keep their stress digits.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with(";;;") {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-empty line");
            if word.ends_with(')') && word.contains('(') {
                continue;
            }
            let phones: Vec<String> = parts.map(String::from).collect();
            if phones.is_empty() {
                return Err(Error::format(format!("dictionary line {}: {word:?} has no phonemes", n + 1)));
            }
            entries.entry(word.to_lowercase()).or_insert(phones);
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fsio::read_to_string(path.as_ref())?)
    }

    pub fn insert(&mut self, word: &str, phones: &[&str]) {
        self.entries.insert(word.to_lowercase(), phones.iter().map(|s| s.to_string()).collect());
    }

    pub fn get(&self, word: &str) -> Option<&[String]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `AH0` -> `AH`
pub fn strip_stress(symbol: &str) -> &str {
    symbol.trim_end_matches(|c: char| c.is_ascii_digit())
}
