//! Back-off n-gram language model read from ARPA text.

use std::collections::HashMap;

use super::vocab::{TokenId, Vocabulary};
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, NEG_INF};

pub const SENTENCE_START: &str = "<s>";
pub const SENTENCE_END: &str = "</s>";
pub const UNKNOWN: &str = "<unk>";

const LN_10: f64 = std::f64::consts::LN_10;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Entry {
    logp: f64,
    backoff: f64,
}

/// Katz back-off n-gram model. Probabilities are stored as natural logs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NGramLm {
    order: usize,
    entries: HashMap<Vec<String>, Entry>,
}

fn malformed(line: usize, reason: impl std::fmt::Display) -> Error {
    Error::malformed("ARPA", format!("line {line}: {reason}"))
}

fn parse_number(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| malformed(line, format!("{field:?} is not a number")))?;
    if v.is_nan() || v > 0.0 && v.is_infinite() {
        return Err(malformed(
            line,
            format!("{field:?} is not a log-probability"),
        ));
    }
    Ok(v)
}

impl NGramLm {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_arpa(text: &str) -> Result<Self> {
        let mut declared: Vec<(usize, usize)> = Vec::new();
        let mut entries = HashMap::new();
        let mut counts: Vec<usize> = Vec::new();
        let mut section: Option<usize> = None;
        let mut in_data = false;
        let mut ended = false;

        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if ended {
                return Err(malformed(lineno, "content after \\end\\"));
            }
            if line == "\\data\\" {
                in_data = true;
                continue;
            }
            if line == "\\end\\" {
                ended = true;
                continue;
            }
            if let Some(rest) = line
                .strip_suffix("-grams:")
                .and_then(|l| l.strip_prefix('\\'))
            {
                let n: usize = rest
                    .parse()
                    .map_err(|_| malformed(lineno, format!("bad section header {line:?}")))?;
                if n == 0 || n != counts.len() + 1 {
                    return Err(malformed(lineno, format!("unexpected section {n}")));
                }
                counts.push(0);
                section = Some(n);
                in_data = false;
                continue;
            }
            if in_data {
                let spec = line
                    .strip_prefix("ngram ")
                    .and_then(|s| s.split_once('='))
                    .ok_or_else(|| malformed(lineno, format!("bad header line {line:?}")))?;
                let n: usize = spec
                    .0
                    .trim()
                    .parse()
                    .map_err(|_| malformed(lineno, "bad ngram order"))?;
                let c: usize = spec
                    .1
                    .trim()
                    .parse()
                    .map_err(|_| malformed(lineno, "bad ngram count"))?;
                declared.push((n, c));
                continue;
            }
            let n = section.ok_or_else(|| malformed(lineno, "entry outside any n-gram section"))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != n + 1 && fields.len() != n + 2 {
                return Err(malformed(lineno, format!("expected {n} words")));
            }
            let logp = parse_number(fields[0], lineno)? * LN_10;
            let backoff = match fields.get(n + 1) {
                Some(f) => parse_number(f, lineno)? * LN_10,
                None => 0.0,
            };
            let words: Vec<String> = fields[1..=n].iter().map(|w| w.to_string()).collect();
            if entries
                .insert(
                    words,
                    Entry {
                        logp: logp.max(NEG_INF),
                        backoff: backoff.max(NEG_INF),
                    },
                )
                .is_some()
            {
                return Err(malformed(lineno, "duplicate n-gram"));
            }
            counts[n - 1] += 1;
        }
        if !ended {
            return Err(Error::malformed("ARPA", "missing \\end\\"));
        }
        if counts.is_empty() {
            return Err(Error::malformed("ARPA", "no n-gram sections"));
        }
        for (n, c) in declared {
            if counts.get(n.wrapping_sub(1)) != Some(&c) {
                return Err(Error::malformed(
                    "ARPA",
                    format!(
                        "header declares {c} {n}-grams, found {:?}",
                        counts.get(n.wrapping_sub(1))
                    ),
                ));
            }
        }
        Ok(Self {
            order: counts.len(),
            entries,
        })
    }

    /// `ln p(word | context)` with back-off. Only the last `order - 1` context
    /// words matter.
    pub fn log_prob(&self, context: &[&str], word: &str) -> f64 {
        let keep = self.order.saturating_sub(1).min(context.len());
        let mut ctx = &context[context.len() - keep..];
        let mut acc = 0.0;
        let mut key: Vec<String> = Vec::with_capacity(self.order);
        loop {
            key.clear();
            key.extend(ctx.iter().map(|w| w.to_string()));
            key.push(word.to_string());
            if let Some(e) = self.entries.get(&key) {
                return (acc + e.logp).max(NEG_INF);
            }
            if ctx.is_empty() {
                return match self.entries.get(&[UNKNOWN.to_string()][..]) {
                    Some(e) => (acc + e.logp).max(NEG_INF),
                    None => NEG_INF,
                };
            }
            key.pop();
            if let Some(e) = self.entries.get(&key) {
                acc += e.backoff;
            }
            ctx = &ctx[1..];
        }
    }

    /// Largest deviation from 1 of `sum_w p(w | h)` over every stored context
    /// `h`, with `w` ranging over `words`.
    pub fn normalization_error(&self, words: &[&str]) -> f64 {
        let mut contexts: Vec<Vec<&str>> = vec![Vec::new()];
        contexts.extend(
            self.entries
                .keys()
                .filter(|k| k.len() < self.order && !k.iter().any(|w| w == SENTENCE_END))
                .map(|k| k.iter().map(String::as_str).collect()),
        );
        contexts
            .iter()
            .map(|ctx| {
                let scores: Vec<f64> = words.iter().map(|w| self.log_prob(ctx, w)).collect();
                log_sum_exp(&scores).exp_m1().abs()
            })
            .fold(0.0, f64::max)
    }
}

/// An [`NGramLm`] viewed through a model vocabulary.
#[derive(Clone, Debug)]
pub struct LmScorer<'a> {
    lm: &'a NGramLm,
    /// LM word per token id; `None` for blank.
    words: Vec<Option<String>>,
    sos: TokenId,
}

impl<'a> LmScorer<'a> {
    pub fn new(lm: &'a NGramLm, vocab: &Vocabulary) -> Self {
        let words = (0..vocab.len())
            .map(|i| {
                if i == vocab.blank() {
                    None
                } else if i == vocab.eos() {
                    Some(SENTENCE_END.to_string())
                } else if i == vocab.sos() {
                    Some(SENTENCE_START.to_string())
                } else {
                    vocab.token(i).map(str::to_string)
                }
            })
            .collect();
        Self {
            lm,
            words,
            sos: vocab.sos(),
        }
    }

    /// LM words of every non-blank token.
    pub fn words(&self) -> Vec<&str> {
        self.words.iter().flatten().map(String::as_str).collect()
    }

    /// `ln p_lm(. | prefix)` over the vocabulary, blank mapped to [`NEG_INF`].
    pub fn score(&self, prefix: &[TokenId]) -> Result<Vec<f64>> {
        let mut context: Vec<&str> = Vec::with_capacity(prefix.len());
        for (i, &t) in prefix.iter().enumerate() {
            let word = if i == 0 && t == self.sos {
                SENTENCE_START
            } else {
                self.words
                    .get(t)
                    .and_then(|w| w.as_deref())
                    .ok_or_else(|| Error::InvalidToken(format!("token {t} has no LM word")))?
            };
            context.push(word);
        }
        Ok(self
            .words
            .iter()
            .map(|w| match w {
                Some(w) => self.lm.log_prob(&context, w),
                None => NEG_INF,
            })
            .collect())
    }
}

/// `ln p_lm(. | prefix)` for every vocabulary entry.
pub fn lm_score_step(lm: &NGramLm, vocab: &Vocabulary, prefix: &[TokenId]) -> Result<Vec<f64>> {
    LmScorer::new(lm, vocab).score(prefix)
}
