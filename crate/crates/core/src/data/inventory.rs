use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio;

/// The 39 ARPAbet phonemes, without stress marks.
pub const ARPABET: [&str; 39] = [
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH", "EH", "ER", "EY", "F", "G", "HH", "IH", "IY", "JH", "K",
    "L", "M", "N", "NG", "OW", "OY", "P", "R", "S", "SH", "T", "TH", "UH", "UW", "V", "W", "Y", "Z", "ZH",
];

/// Filler symbol that brings the dictionary phonemes to 40.
pub const FILLER: &str = "SPN";
pub const PAUSE_SHORT: &str = "PAU_S";
pub const PAUSE_LONG: &str = "PAU_L";

/// Ordered symbol list. The last two symbols are the short and the long
/// pause, in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct PhonemeInventory {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for PhonemeInventory {
    /// 39 ARPAbet symbols, the filler and two pauses: 42 in total.
    fn default() -> Self {
        let symbols = ARPABET.iter().copied().chain([FILLER, PAUSE_SHORT, PAUSE_LONG]).map(String::from).collect();
        Self::new(symbols).expect("built-in inventory is valid")
    }
}

impl PhonemeInventory {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        if symbols.len() < 3 {
            return Err(Error::invalid("an inventory needs at least one phoneme and two pauses"));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("bad phoneme symbol {s:?} at line {}", i + 1)));
            }
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate phoneme symbol {s:?}")));
            }
        }
        Ok(Self { symbols, index })
    }

    /// One symbol per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let symbols =
            text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect();
        Self::new(symbols)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fsio::read_to_string(path.as_ref())?)
    }

    pub fn to_text(&self) -> String {
        self.symbols.iter().map(|s| format!("{s}\n")).collect()
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn id(&self, symbol: &str) -> Result<usize> {
        self.index.get(symbol).copied().ok_or_else(|| Error::Inventory(symbol.to_string()))
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn short_pause(&self) -> usize {
        self.symbols.len() - 2
    }

    pub fn long_pause(&self) -> usize {
        self.symbols.len() - 1
    }

    pub fn is_pause(&self, id: usize) -> bool {
        id >= self.short_pause() && id < self.symbols.len()
    }
}
