use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TokenId = usize;

/// How transcripts map onto vocabulary entries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenUnit {
    Word,
    #[default]
    Char,
}

/// Spelling of the word separator inside character vocabularies.
pub const SPACE_TOKEN: &str = "<space>";

/// Output symbol inventory shared by every model of an ensemble.
///
/// `sos` and `eos` may share an id; blank never coincides with either.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    blank: TokenId,
    sos: TokenId,
    eos: TokenId,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>, blank: TokenId, sos: TokenId, eos: TokenId) -> Result<Self> {
        let n = tokens.len();
        if n < 3 {
            return Err(Error::InvalidConfig(format!(
                "vocabulary needs at least 3 entries, got {n}"
            )));
        }
        if blank >= n || sos >= n || eos >= n {
            return Err(Error::InvalidConfig(format!(
                "special ids blank={blank} sos={sos} eos={eos} out of range for {n} tokens"
            )));
        }
        if blank == sos || blank == eos {
            return Err(Error::InvalidConfig(
                "blank must differ from sos and eos".into(),
            ));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate token {t:?}")));
            }
        }
        let vocab = Self {
            tokens,
            index,
            blank,
            sos,
            eos,
        };
        if vocab.label_tokens().next().is_none() {
            return Err(Error::InvalidConfig(
                "vocabulary has no ordinary symbols".into(),
            ));
        }
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn blank(&self) -> TokenId {
        self.blank
    }

    pub fn sos(&self) -> TokenId {
        self.sos
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    /// Ordinary symbols: everything except blank, sos and eos.
    pub fn label_tokens(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.len()).filter(move |&i| i != self.blank && i != self.sos && i != self.eos)
    }

    /// Tokens a hypothesis may be extended with: symbols plus eos.
    pub fn extension_tokens(&self) -> Vec<TokenId> {
        (0..self.len())
            .filter(|&i| i != self.blank && (i != self.sos || self.sos == self.eos))
            .collect()
    }

    pub fn check(&self, id: TokenId) -> Result<()> {
        if id >= self.len() {
            return Err(Error::InvalidToken(format!(
                "token id {id} out of range for vocabulary of {}",
                self.len()
            )));
        }
        Ok(())
    }

    /// Maps a transcript to token ids.
    pub fn encode_text(&self, text: &str, unit: TokenUnit) -> Result<Vec<TokenId>> {
        let lookup = |t: &str| {
            self.id(t)
                .filter(|&i| i != self.blank && i != self.sos && i != self.eos)
                .ok_or_else(|| Error::InvalidToken(format!("{t:?} is not in the vocabulary")))
        };
        match unit {
            TokenUnit::Word => text.split_whitespace().map(lookup).collect(),
            TokenUnit::Char => {
                let space = self.id(SPACE_TOKEN);
                let mut out = Vec::new();
                for word in text.split_whitespace() {
                    if let (Some(s), false) = (space, out.is_empty()) {
                        out.push(s);
                    }
                    let mut buf = [0u8; 4];
                    for c in word.chars() {
                        out.push(lookup(c.encode_utf8(&mut buf))?);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Renders token ids back to text, skipping special tokens.
    pub fn decode_tokens(&self, ids: &[TokenId], unit: TokenUnit) -> String {
        let words = ids
            .iter()
            .filter(|&&i| i != self.blank && i != self.sos && i != self.eos)
            .filter_map(|&i| self.token(i));
        match unit {
            TokenUnit::Word => words.collect::<Vec<_>>().join(" "),
            TokenUnit::Char => words
                .map(|t| if t == SPACE_TOKEN { " " } else { t })
                .collect(),
        }
    }
}
