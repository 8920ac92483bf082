//! Teacher-forced token outcomes and ensemble diversity measures.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::joint_score_single;
use crate::math::argmax;
use crate::scoring::{AttentionScorer, CtcPosteriorGrid, CtcPrefixScorer, TokenId, Vocabulary};

/// Greedy prediction of every reference position given the true prefix.
///
/// Position `n` is the candidate (symbols and eos) maximizing
/// `ctc_weight * ctc + (1 - ctc_weight) * att` after `sos y_1 .. y_{n-1}`,
/// lowest id on ties.
pub fn teacher_forced_predict(
    attention: &dyn AttentionScorer,
    grid: &CtcPosteriorGrid,
    vocab: &Vocabulary,
    reference: &[TokenId],
    ctc_weight: f64,
) -> Result<Vec<TokenId>> {
    if reference.is_empty() {
        return Err(Error::Empty("reference has no tokens".into()));
    }
    if !(0.0..=1.0).contains(&ctc_weight) {
        return Err(Error::InvalidWeights(format!(
            "ctc weight {ctc_weight} not in [0, 1]"
        )));
    }
    for &t in reference {
        vocab.check(t)?;
        if t == vocab.blank() || t == vocab.sos() || t == vocab.eos() {
            return Err(Error::InvalidToken(format!(
                "reference contains special token {t}"
            )));
        }
    }
    if attention.vocab_size() != vocab.len() || grid.vocab_size() != vocab.len() {
        return Err(Error::DimensionMismatch(
            "scorer vocabulary size differs".into(),
        ));
    }
    let scorer = CtcPrefixScorer::new(grid, vocab.sos(), vocab.eos())?;
    let candidates = vocab.extension_tokens();
    let mut prefix = vec![vocab.sos()];
    let mut state = scorer.initial_state();
    let mut out = Vec::with_capacity(reference.len());
    for &truth in reference {
        let att = attention.score(&prefix)?;
        let ctc = scorer.score_step(&prefix, &state, &candidates)?;
        let scores: Vec<f64> = candidates
            .iter()
            .zip(&ctc)
            .map(|(&c, (psi, _))| joint_score_single(att[c], psi - state.prefix_logp, ctc_weight))
            .collect();
        let best = argmax(&scores).expect("candidates are never empty");
        out.push(candidates[best]);
        let k = candidates
            .binary_search(&truth)
            .expect("reference token is a candidate");
        state = ctc[k].1.clone();
        prefix.push(truth);
    }
    Ok(out)
}

/// Which models predicted each reference token correctly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenOutcomeMatrix {
    pub models: Vec<String>,
    pub rows: Vec<OutcomeRow>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub utterance: String,
    pub position: usize,
    pub correct: Vec<bool>,
}

impl TokenOutcomeMatrix {
    pub fn new(models: Vec<String>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Empty(
                "outcome matrix needs at least one model".into(),
            ));
        }
        Ok(Self {
            models,
            rows: Vec::new(),
        })
    }

    /// Builds a matrix from bare rows, naming models `m0, m1, ...`.
    pub fn from_bools(rows: &[Vec<bool>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let mut out = Self::new((0..m).map(|i| format!("m{i}")).collect())?;
        for (k, r) in rows.iter().enumerate() {
            out.push(OutcomeRow {
                utterance: String::new(),
                position: k,
                correct: r.clone(),
            })?;
        }
        Ok(out)
    }

    pub fn num_models(&self) -> usize {
        self.models.len()
    }

    pub fn push(&mut self, row: OutcomeRow) -> Result<()> {
        if row.correct.len() != self.models.len() {
            return Err(Error::DimensionMismatch(format!(
                "row has {} outcomes for {} models",
                row.correct.len(),
                self.models.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Appends one utterance: `predictions[i]` is model `i`'s teacher-forced
    /// output for `reference`.
    pub fn push_utterance(
        &mut self,
        utterance: &str,
        reference: &[TokenId],
        predictions: &[Vec<TokenId>],
    ) -> Result<()> {
        if predictions.len() != self.models.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} prediction sequences for {} models",
                predictions.len(),
                self.models.len()
            )));
        }
        if predictions.iter().any(|p| p.len() != reference.len()) {
            return Err(Error::DimensionMismatch(
                "prediction length differs from reference".into(),
            ));
        }
        for (n, truth) in reference.iter().enumerate() {
            self.rows.push(OutcomeRow {
                utterance: utterance.to_string(),
                position: n,
                correct: predictions.iter().map(|p| p[n] == *truth).collect(),
            });
        }
        Ok(())
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Empty("outcome matrix has no rows".into()));
        }
        Ok(())
    }

    /// Per-model fraction of correct tokens.
    pub fn accuracies(&self) -> Result<Vec<f64>> {
        self.check_nonempty()?;
        let total = self.rows.len() as f64;
        Ok((0..self.num_models())
            .map(|i| self.rows.iter().filter(|r| r.correct[i]).count() as f64 / total)
            .collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["utterance".to_string(), "position".to_string()];
        header.extend(self.models.iter().cloned());
        out.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.utterance.clone(), r.position.to_string()];
            rec.extend(
                r.correct
                    .iter()
                    .map(|&c| if c { "1" } else { "0" }.to_string()),
            );
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let bad = |reason: String| Error::malformed("outcome csv", reason);
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers()?.clone();
        if header.len() < 3 || &header[0] != "utterance" || &header[1] != "position" {
            return Err(bad("header must be utterance,position,<model>...".into()));
        }
        let mut out = Self::new(header.iter().skip(2).map(str::to_string).collect())?;
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(bad(format!("row {} has {} fields", k + 1, rec.len())));
            }
            let position = rec[1]
                .parse()
                .map_err(|_| bad(format!("row {}: bad position {:?}", k + 1, &rec[1])))?;
            let correct = rec
                .iter()
                .skip(2)
                .map(|v| match v {
                    "1" => Ok(true),
                    "0" => Ok(false),
                    _ => Err(bad(format!("row {}: outcome {v:?} is not 0 or 1", k + 1))),
                })
                .collect::<Result<_>>()?;
            out.rows.push(OutcomeRow {
                utterance: rec[0].to_string(),
                position,
                correct,
            });
        }
        Ok(out)
    }
}

/// `buckets[k]`: fraction of tokens predicted correctly by exactly `k`
/// models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifficultyHistogram {
    pub buckets: Vec<f64>,
}

impl DifficultyHistogram {
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("correct_models,fraction\n");
        for (k, f) in self.buckets.iter().enumerate() {
            s += &format!("{k},{f:.6}\n");
        }
        s
    }
}

pub fn difficulty_measure(m: &TokenOutcomeMatrix) -> Result<DifficultyHistogram> {
    m.check_nonempty()?;
    let mut counts = vec![0usize; m.num_models() + 1];
    for r in &m.rows {
        counts[r.correct.iter().filter(|&&c| c).count()] += 1;
    }
    let total = m.rows.len() as f64;
    Ok(DifficultyHistogram {
        buckets: counts.into_iter().map(|c| c as f64 / total).collect(),
    })
}

fn check_order(order: &[usize], m: usize) -> Result<()> {
    let mut seen = vec![false; m];
    if order.len() != m
        || order
            .iter()
            .any(|&i| i >= m || std::mem::replace(&mut seen[i], true))
    {
        return Err(Error::InvalidConfig(format!(
            "{order:?} is not a permutation of {m} models"
        )));
    }
    Ok(())
}

/// `gain[k]`: fraction of tokens correct under model `order[k]` and wrong
/// under every model before it.
pub fn incremental_gain(m: &TokenOutcomeMatrix, order: &[usize]) -> Result<Vec<f64>> {
    m.check_nonempty()?;
    check_order(order, m.num_models())?;
    let mut counts = vec![0usize; order.len()];
    for r in &m.rows {
        if let Some(k) = order.iter().position(|&i| r.correct[i]) {
            counts[k] += 1;
        }
    }
    let total = m.rows.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

/// Fraction of tokens no model predicts correctly.
pub fn oracle_error_floor(m: &TokenOutcomeMatrix) -> Result<f64> {
    m.check_nonempty()?;
    let missed = m
        .rows
        .iter()
        .filter(|r| !r.correct.iter().any(|&c| c))
        .count();
    Ok(missed as f64 / m.rows.len() as f64)
}

/// Gain table in percent, one decimal.
pub fn gain_csv(m: &TokenOutcomeMatrix, order: &[usize]) -> Result<String> {
    let gains = incremental_gain(m, order)?;
    let mut s = String::from("model,gain_percent,cumulative_percent\n");
    let mut cum = 0.0;
    for (&i, g) in order.iter().zip(gains) {
        cum += g;
        s += &format!("{},{:.1},{:.1}\n", m.models[i], 100.0 * g, 100.0 * cum);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::log_softmax;
    use crate::scoring::BigramAttention;

    fn matrix(rows: &[&str]) -> TokenOutcomeMatrix {
        let rows: Vec<Vec<bool>> = rows
            .iter()
            .map(|r| r.chars().map(|c| c == 'T').collect())
            .collect();
        TokenOutcomeMatrix::from_bools(&rows).unwrap()
    }

    #[test]
    fn histogram_counts() {
        let h = difficulty_measure(&matrix(&["TT", "TF", "FF"])).unwrap();
        for b in h.buckets {
            assert!((b - 1.0 / 3.0).abs() < 1e-15);
        }
        let h = difficulty_measure(&matrix(&["TTT", "TTT"])).unwrap();
        assert_eq!(h.buckets, vec![0.0, 0.0, 0.0, 1.0]);
        assert!(difficulty_measure(&TokenOutcomeMatrix::new(vec!["a".into()]).unwrap()).is_err());
    }

    #[test]
    fn gains_and_floor() {
        let m = matrix(&["TF", "FT", "FF"]);
        let g = incremental_gain(&m, &[0, 1]).unwrap();
        assert!((g[0] - 1.0 / 3.0).abs() < 1e-15 && (g[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((oracle_error_floor(&m).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let dup = matrix(&["TT", "FF", "TT"]);
        assert_eq!(incremental_gain(&dup, &[1, 0]).unwrap()[1], 0.0);
        assert!(incremental_gain(&m, &[0, 0]).is_err());
        assert!(incremental_gain(&m, &[0]).is_err());
        assert_eq!(oracle_error_floor(&matrix(&["TT"])).unwrap(), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let mut m = TokenOutcomeMatrix::new(vec!["MEL".into(), "MODGD".into()]).unwrap();
        m.push_utterance("u1", &[3, 4, 5], &[vec![3, 4, 2], vec![3, 2, 5]])
            .unwrap();
        let text = m.to_csv_string();
        assert!(text.starts_with("utterance,position,MEL,MODGD\nu1,0,1,1\n"));
        assert_eq!(TokenOutcomeMatrix::read_csv(text.as_bytes()).unwrap(), m);
        assert!(TokenOutcomeMatrix::read_csv("utterance,position,a\nu,0,2\n".as_bytes()).is_err());
        assert!(TokenOutcomeMatrix::read_csv("id,pos,a\n".as_bytes()).is_err());
    }

    #[test]
    fn gain_report_precision() {
        let m = matrix(&["TF", "FT", "FF"]);
        assert_eq!(
            gain_csv(&m, &[0, 1]).unwrap(),
            "model,gain_percent,cumulative_percent\nm0,33.3,33.3\nm1,33.3,66.7\n"
        );
    }

    fn vocab() -> Vocabulary {
        let t = ["<blank>", "<sos/eos>", "a", "b", "c"]
            .map(String::from)
            .to_vec();
        Vocabulary::new(t, 0, 1, 1).unwrap()
    }

    #[test]
    fn uniform_scorer_picks_lowest_id() {
        let v = vocab();
        let flat = log_softmax(&[0.0; 5]);
        let att = BigramAttention {
            rows: vec![flat.clone(); 5],
        };
        let grid = CtcPosteriorGrid::new(vec![flat; 4], 0).unwrap();
        let p = teacher_forced_predict(&att, &grid, &v, &[3, 4, 2], 0.0).unwrap();
        assert_eq!(p, vec![1, 1, 1]);
    }

    #[test]
    fn perfect_model() {
        let v = vocab();
        // attention and CTC both certain of the sequence a b c
        let row = |k: usize| {
            log_softmax(
                &(0..5)
                    .map(|i| if i == k { 8.0 } else { 0.0 })
                    .collect::<Vec<_>>(),
            )
        };
        let mut rows = vec![row(0); 5];
        rows[1] = row(2);
        rows[2] = row(3);
        rows[3] = row(4);
        rows[4] = row(1);
        let att = BigramAttention { rows };
        let grid = CtcPosteriorGrid::new(vec![row(2), row(3), row(4)], 0).unwrap();
        let p = teacher_forced_predict(&att, &grid, &v, &[2, 3, 4], 0.3).unwrap();
        assert_eq!(p, vec![2, 3, 4]);
        assert!(teacher_forced_predict(&att, &grid, &v, &[2, 0], 0.3).is_err());
        assert!(teacher_forced_predict(&att, &grid, &v, &[], 0.3).is_err());
        assert!(teacher_forced_predict(&att, &grid, &v, &[9], 0.3).is_err());
    }
}
