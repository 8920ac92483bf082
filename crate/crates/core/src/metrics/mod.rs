//! Error rates and checkpoint averaging.

mod checkpoint;

pub use checkpoint::average_checkpoints;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Alignment counts between a reference and a hypothesis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOps {
    pub hits: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl EditOps {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn ref_len(&self) -> usize {
        self.hits + self.substitutions + self.deletions
    }

    pub fn hyp_len(&self) -> usize {
        self.hits + self.substitutions + self.insertions
    }
}

impl std::ops::Add for EditOps {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            hits: self.hits + o.hits,
            substitutions: self.substitutions + o.substitutions,
            deletions: self.deletions + o.deletions,
            insertions: self.insertions + o.insertions,
        }
    }
}

impl std::iter::Sum for EditOps {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Unit-cost Levenshtein alignment.
///
/// Among minimal alignments the traceback takes a diagonal step (hit or
/// substitution) over a deletion, and a deletion over an insertion.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditOps {
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            d[i * w + j] = sub.min(d[(i - 1) * w + j] + 1).min(d[i * w + j - 1] + 1);
        }
    }

    let mut ops = EditOps::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if here == d[(i - 1) * w + j - 1] + usize::from(!same) {
                if same {
                    ops.hits += 1;
                } else {
                    ops.substitutions += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == d[(i - 1) * w + j] + 1 {
            ops.deletions += 1;
            i -= 1;
        } else {
            ops.insertions += 1;
            j -= 1;
        }
    }
    ops
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreUnit {
    #[default]
    Word,
    Char,
}

impl std::str::FromStr for ScoreUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "word" => Ok(Self::Word),
            "char" => Ok(Self::Char),
            _ => Err(Error::InvalidConfig(format!(
                "unknown unit {s:?}, expected word or char"
            ))),
        }
    }
}

impl std::fmt::Display for ScoreUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Word => "word",
            Self::Char => "char",
        })
    }
}

/// Text clean-up applied before tokenizing for scoring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Normalization {
    pub lowercase: bool,
    /// Char unit only: drop whitespace instead of keeping single spaces.
    pub remove_whitespace: bool,
}

impl Normalization {
    pub fn default_for(unit: ScoreUnit) -> Self {
        match unit {
            ScoreUnit::Word => Self {
                lowercase: true,
                remove_whitespace: false,
            },
            ScoreUnit::Char => Self {
                lowercase: false,
                remove_whitespace: true,
            },
        }
    }
}

/// Splits `text` into scoring units.
pub fn tokenize(text: &str, unit: ScoreUnit, norm: Normalization) -> Vec<String> {
    let text = if norm.lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    match unit {
        ScoreUnit::Word => text.split_whitespace().map(str::to_string).collect(),
        ScoreUnit::Char if norm.remove_whitespace => text
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect(),
        ScoreUnit::Char => text
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .chars()
            .map(String::from)
            .collect(),
    }
}

/// Corpus-pooled alignment counts.
pub fn corpus_edit_ops<R: AsRef<str>, H: AsRef<str>>(
    refs: &[R],
    hyps: &[H],
    unit: ScoreUnit,
    norm: Normalization,
) -> Result<EditOps> {
    if refs.len() != hyps.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} references for {} hypotheses",
            refs.len(),
            hyps.len()
        )));
    }
    Ok(refs
        .iter()
        .zip(hyps)
        .map(|(r, h)| {
            edit_distance(
                &tokenize(r.as_ref(), unit, norm),
                &tokenize(h.as_ref(), unit, norm),
            )
        })
        .sum())
}

/// `100 * errors / reference length`.
pub fn error_rate(ops: &EditOps) -> Result<f64> {
    if ops.ref_len() == 0 {
        return Err(Error::Empty("reference corpus has no tokens".into()));
    }
    Ok(100.0 * ops.errors() as f64 / ops.ref_len() as f64)
}

/// Pooled word (or, with `ScoreUnit::Char`, character) error rate in
/// percent, using the default normalization for `unit`.
pub fn wer<R: AsRef<str>, H: AsRef<str>>(refs: &[R], hyps: &[H], unit: ScoreUnit) -> Result<f64> {
    error_rate(&corpus_edit_ops(
        refs,
        hyps,
        unit,
        Normalization::default_for(unit),
    )?)
}

/// Machine-readable scoring summary. `S`, `D`, `I` and `N` count units of
/// `unit`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoringReport {
    pub unit: ScoreUnit,
    pub utterances: usize,
    pub wer: f64,
    pub cer: f64,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "I")]
    pub i: usize,
    #[serde(rename = "N")]
    pub n: usize,
}

impl ScoringReport {
    /// Scores a corpus at both levels. A level with no reference units gets a
    /// NaN rate unless it is `unit`, which is an error.
    pub fn compute<R: AsRef<str>, H: AsRef<str>>(
        refs: &[R],
        hyps: &[H],
        unit: ScoreUnit,
    ) -> Result<Self> {
        let word = corpus_edit_ops(
            refs,
            hyps,
            ScoreUnit::Word,
            Normalization::default_for(ScoreUnit::Word),
        )?;
        let chars = corpus_edit_ops(
            refs,
            hyps,
            ScoreUnit::Char,
            Normalization::default_for(ScoreUnit::Char),
        )?;
        let main = match unit {
            ScoreUnit::Word => word,
            ScoreUnit::Char => chars,
        };
        error_rate(&main)?;
        Ok(Self {
            unit,
            utterances: refs.len(),
            wer: error_rate(&word).unwrap_or(f64::NAN),
            cer: error_rate(&chars).unwrap_or(f64::NAN),
            s: main.substitutions,
            d: main.deletions,
            i: main.insertions,
            n: main.ref_len(),
        })
    }

    /// Plain-text summary.
    pub fn summary(&self) -> String {
        format!(
            "utterances {}\nWER {:.2}%\nCER {:.2}%\n{} errors: S={} D={} I={} N={}\n",
            self.utterances, self.wer, self.cer, self.unit, self.s, self.d, self.i, self.n
        )
    }
}
