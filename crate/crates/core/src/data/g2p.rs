use super::dictionary::{strip_stress, Dictionary};
use super::inventory::PhonemeInventory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pause {
    None,
    Short,
    Long,
}

/// Where pauses go. Adjacent pauses collapse into the longest of them.
#[derive(Debug, Clone, PartialEq)]
pub struct PauseRules {
    pub start: Pause,
    pub end: Pause,
    pub between_words: Pause,
    /// Punctuation marks that produce a pause. Any other punctuation is dropped.
    pub punctuation: Vec<(char, Pause)>,
}

impl Default for PauseRules {
    fn default() -> Self {
        Self {
            start: Pause::Long,
            end: Pause::Long,
            between_words: Pause::None,
            punctuation: vec![(',', Pause::Short), ('.', Pause::Long), ('!', Pause::Long), ('?', Pause::Long)],
        }
    }
}

impl PauseRules {
    fn for_mark(&self, c: char) -> Option<Pause> {
        self.punctuation.iter().find(|(m, _)| *m == c).map(|(_, p)| *p)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Pause(Pause),
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

fn tokenize(text: &str, rules: &PauseRules) -> Vec<Token> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if is_word_char(c) {
            word.extend(c.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(Token::Word(std::mem::take(&mut word)));
        }
        if let Some(p) = rules.for_mark(c) {
            out.push(Token::Pause(p));
        }
    }
    if !word.is_empty() {
        out.push(Token::Word(word));
    }
    out
}

/// Text to phoneme ids with the default pause rules.
pub fn g2p(text: &str, dict: &Dictionary, inventory: &PhonemeInventory) -> Result<Vec<usize>> {
    g2p_with_rules(text, dict, inventory, &PauseRules::default())
}

pub fn g2p_with_rules(
    text: &str,
    dict: &Dictionary,
    inventory: &PhonemeInventory,
    rules: &PauseRules,
) -> Result<Vec<usize>> {
    let tokens = tokenize(text, rules);
    if !tokens.iter().any(|t| matches!(t, Token::Word(_))) {
        return Err(Error::invalid(format!("no words in {text:?}")));
    }
    let mut seq: Vec<Token> = vec![Token::Pause(rules.start)];
    let mut last_was_word = false;
    for t in tokens {
        match t {
            Token::Word(w) => {
                if last_was_word {
                    seq.push(Token::Pause(rules.between_words));
                }
                seq.push(Token::Word(w));
                last_was_word = true;
            }
            p @ Token::Pause(_) => {
                seq.push(p);
                last_was_word = false;
            }
        }
    }
    seq.push(Token::Pause(rules.end));

    let mut ids = Vec::new();
    let mut pending = Pause::None;
    let flush = |pending: &mut Pause, ids: &mut Vec<usize>| {
        match *pending {
            Pause::None => {}
            Pause::Short => ids.push(inventory.short_pause()),
            Pause::Long => ids.push(inventory.long_pause()),
        }
        *pending = Pause::None;
    };
    for t in seq {
        match t {
            Token::Pause(p) => pending = pending.max(p),
            Token::Word(w) => {
                flush(&mut pending, &mut ids);
                let phones = dict.get(&w).ok_or_else(|| Error::Oov(w.clone()))?;
                for ph in phones {
                    ids.push(inventory.id(strip_stress(ph))?);
                }
            }
        }
    }
    flush(&mut pending, &mut ids);
    Ok(ids)
}
