use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

/// The seven emotion labels in reporting order.
pub const EMOTION_LABELS: [&str; 7] = [
    "sadness", "anger", "neutral", "fear", "surprise", "disgust", "joy",
];

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const CLS_ID: usize = 2;
pub const EOS_ID: usize = 3;
/// Label tokens occupy the contiguous block starting here.
pub const LABEL_BLOCK_START: usize = 4;
/// First id available to ordinary tokens: 4 specials + 7 label tokens.
pub const FIRST_ORDINARY_ID: usize = LABEL_BLOCK_START + EMOTION_LABELS.len();

const SPECIAL_STRINGS: [&str; 4] = ["<pad>", "<unk>", "<cls>", "<eos>"];

/// Word-level vocabulary. Ids 0..11 are fixed (pad, unk, cls, eos, then one
/// reserved token per emotion label); ordinary tokens follow, ordered by
/// (frequency desc, token asc) at build time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

/// Lowercases, splits on Unicode whitespace and strips leading/trailing
/// ASCII punctuation. Empty fragments (pure punctuation) are dropped.
pub fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| c.is_ascii_punctuation()))
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

impl Vocab {
    /// Builds a vocabulary from training texts. `max_size` counts the full
    /// id space including the 11 reserved ids.
    pub fn build<S: AsRef<str>>(texts: &[S], min_freq: usize, max_size: usize) -> Result<Vocab> {
        if texts.is_empty() {
            return Err(Error::Argument("cannot build a vocabulary from no texts".into()));
        }
        if max_size < FIRST_ORDINARY_ID {
            return Err(Error::Config(format!(
                "max_size {} is smaller than the {} reserved special and label ids",
                max_size, FIRST_ORDINARY_ID
            )));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in texts {
            for w in words(text.as_ref()) {
                *counts.entry(w).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> =
            counts.into_iter().filter(|(_, c)| *c >= min_freq).collect();
        ranked.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));
        ranked.truncate(max_size - FIRST_ORDINARY_ID);
        let tokens: Vec<String> = ranked.into_iter().map(|(t, _)| t).collect();
        Ok(Vocab::from_tokens(tokens))
    }

    fn from_tokens(tokens: Vec<String>) -> Vocab {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), FIRST_ORDINARY_ID + i))
            .collect();
        Vocab { tokens, index }
    }

    /// Total id space: specials, label block, then ordinary tokens.
    pub fn size(&self) -> usize {
        FIRST_ORDINARY_ID + self.tokens.len()
    }

    /// Id of an ordinary token, if present.
    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// String form of any id, including specials and label tokens.
    pub fn token_of(&self, id: usize) -> Option<String> {
        if id < LABEL_BLOCK_START {
            return Some(SPECIAL_STRINGS[id].to_string());
        }
        if id < FIRST_ORDINARY_ID {
            return Some(format!("<{}>", EMOTION_LABELS[id - LABEL_BLOCK_START]));
        }
        self.tokens.get(id - FIRST_ORDINARY_ID).map(|t| t.to_string())
    }

    /// Token id reserved for an emotion label.
    pub fn label_id(&self, label: &str) -> Option<usize> {
        EMOTION_LABELS
            .iter()
            .position(|&l| l == label)
            .map(|i| LABEL_BLOCK_START + i)
    }

    /// Label string for an id inside the label block.
    pub fn label_of_id(&self, id: usize) -> Option<&'static str> {
        if (LABEL_BLOCK_START..FIRST_ORDINARY_ID).contains(&id) {
            Some(EMOTION_LABELS[id - LABEL_BLOCK_START])
        } else {
            None
        }
    }

    pub fn is_label_id(&self, id: usize) -> bool {
        (LABEL_BLOCK_START..FIRST_ORDINARY_ID).contains(&id)
    }

    pub fn ordinary_tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Writes one ordinary token per line; the reserved block is implicit.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for t in &self.tokens {
            debug_assert!(!t.contains(['\n', '\r']), "token contains a line break");
            out.push_str(t);
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocab> {
        let text = std::fs::read_to_string(path)?;
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        let mut seen = HashMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Format(format!(
                    "vocabulary file {}: empty token on line {}",
                    path.display(),
                    i + 1
                )));
            }
            if let Some(first) = seen.insert(t.clone(), i + 1) {
                return Err(Error::Format(format!(
                    "vocabulary file {}: token \"{}\" repeated on lines {} and {}",
                    path.display(),
                    t,
                    first,
                    i + 1
                )));
            }
        }
        Ok(Vocab::from_tokens(tokens))
    }
}

/// A tokenized text: [cls] + word ids, truncated to max_len, padded with
/// the pad id. The mask is true exactly on real (non-pad) positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    pub ids: Vec<usize>,
    pub true_length: usize,
    pub mask: Vec<bool>,
}

impl TokenSeq {
    /// The non-padding prefix.
    pub fn real_ids(&self) -> &[usize] {
        &self.ids[..self.true_length]
    }
}

pub fn tokenize(text: &str, vocab: &Vocab, max_len: usize) -> Result<TokenSeq> {
    if max_len < 2 {
        return Err(Error::Argument(format!(
            "max_len must be at least 2, got {max_len}"
        )));
    }
    let mut ids = vec![CLS_ID];
    for w in words(text) {
        if ids.len() == max_len {
            break;
        }
        ids.push(vocab.id_of(&w).unwrap_or(UNK_ID));
    }
    let true_length = ids.len();
    ids.resize(max_len, PAD_ID);
    let mask = (0..max_len).map(|i| i < true_length).collect();
    Ok(TokenSeq {
        ids,
        true_length,
        mask,
    })
}
