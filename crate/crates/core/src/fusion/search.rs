//! Joint CTC/attention beam search over an ensemble of models.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{max_output_length, DecodeConfig};
use super::weights::{weighted_sum, FusionWeights, ATT, CTC};
use crate::error::{Error, Result};
use crate::scoring::{
    AttentionScorer, CtcPosteriorGrid, CtcPrefixScorer, CtcPrefixState, LmScorer, TokenId,
    Vocabulary,
};

/// One ensemble member as seen by the search.
#[derive(Clone, Copy)]
pub struct ModelInput<'a> {
    pub attention: &'a dyn AttentionScorer,
    pub grid: &'a CtcPosteriorGrid,
    /// Feature frames of this model's input, before subsampling.
    pub speech_frames: usize,
}

/// Unweighted log-scores accumulated along a hypothesis.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    /// Attention log-probability per model.
    pub attention: Vec<f64>,
    /// CTC log-probability per model.
    pub ctc: Vec<f64>,
    /// LM log-probability; zero without an LM.
    pub lm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NBestEntry {
    /// Output tokens without sos and eos.
    pub tokens: Vec<TokenId>,
    pub score: f64,
    pub breakdown: ScoreBreakdown,
    /// Closed because it reached the length cap.
    pub hit_maxlen: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    /// Best first.
    pub nbest: Vec<NBestEntry>,
    pub maxlen: usize,
}

impl DecodeResult {
    pub fn best(&self) -> Option<&NBestEntry> {
        self.nbest.first()
    }
}

/// Scores of one candidate extension.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateScore {
    pub token: TokenId,
    /// `[attention, ctc]` step log-scores per model.
    pub per_scorer: Vec<[f64; 2]>,
    pub lm: f64,
    /// Weighted model sum, without the LM term.
    pub combined: f64,
    /// `combined + lm_weight * lm`.
    pub total: f64,
}

#[derive(Clone, Debug)]
struct Hyp {
    /// Starts with sos.
    tokens: Vec<TokenId>,
    score: f64,
    att: Vec<f64>,
    ctc: Vec<f64>,
    lm: f64,
    states: Vec<CtcPrefixState>,
}

/// Score descending, then token ids ascending, shorter first on a shared
/// prefix.
fn rank(a_score: f64, a_tokens: &[TokenId], b_score: f64, b_tokens: &[TokenId]) -> Ordering {
    b_score
        .total_cmp(&a_score)
        .then_with(|| a_tokens.cmp(b_tokens))
}

/// The `k` allowed tokens with the highest `sum_i alpha_i,att * att[i][c]`,
/// lower ids first on ties.
pub fn pre_beam_select(
    att_scores: &[Vec<f64>],
    w: &FusionWeights,
    pre_beam_size: usize,
    allowed: &[TokenId],
) -> Result<Vec<TokenId>> {
    if att_scores.len() != w.num_models() {
        return Err(Error::DimensionMismatch(format!(
            "{} attention rows for {} models",
            att_scores.len(),
            w.num_models()
        )));
    }
    let k = pre_beam_size.min(allowed.len());
    if k == allowed.len() || w.attention_mass() == 0.0 {
        return Ok(allowed.to_vec());
    }
    let mut keyed = Vec::with_capacity(allowed.len());
    for &c in allowed {
        let mut key = 0.0;
        for (row, a) in att_scores.iter().zip(w.alpha()) {
            let v = row.get(c).copied().ok_or_else(|| {
                Error::DimensionMismatch(format!("attention row of {} has no token {c}", row.len()))
            })?;
            key += a[ATT] * v;
        }
        keyed.push((key, c));
    }
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<TokenId> = keyed.into_iter().take(k).map(|(_, c)| c).collect();
    out.sort_unstable();
    Ok(out)
}

/// Everything fixed for the duration of one search.
struct Search<'a> {
    models: &'a [ModelInput<'a>],
    ctc: Vec<CtcPrefixScorer<'a>>,
    lm: Option<&'a LmScorer<'a>>,
    vocab: &'a Vocabulary,
    w: &'a FusionWeights,
}

impl<'a> Search<'a> {
    fn new(
        models: &'a [ModelInput<'a>],
        lm: Option<&'a LmScorer<'a>>,
        vocab: &'a Vocabulary,
        w: &'a FusionWeights,
    ) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Empty("ensemble has no models".into()));
        }
        if models.len() != w.num_models() {
            return Err(Error::InvalidWeights(format!(
                "{} weight rows for {} models",
                w.num_models(),
                models.len()
            )));
        }
        let n = vocab.len();
        let mut ctc = Vec::with_capacity(models.len());
        for (i, m) in models.iter().enumerate() {
            if m.attention.vocab_size() != n || m.grid.vocab_size() != n {
                return Err(Error::DimensionMismatch(format!(
                    "model {i}: attention over {} and CTC over {} tokens, vocabulary has {n}",
                    m.attention.vocab_size(),
                    m.grid.vocab_size()
                )));
            }
            if m.grid.blank() != vocab.blank() {
                return Err(Error::DimensionMismatch(format!(
                    "model {i}: CTC blank {} differs from vocabulary blank {}",
                    m.grid.blank(),
                    vocab.blank()
                )));
            }
            ctc.push(CtcPrefixScorer::new(m.grid, vocab.sos(), vocab.eos())?);
        }
        Ok(Self {
            models,
            ctc,
            lm,
            vocab,
            w,
        })
    }

    fn initial(&self) -> Hyp {
        let m = self.models.len();
        Hyp {
            tokens: vec![self.vocab.sos()],
            score: 0.0,
            att: vec![0.0; m],
            ctc: vec![0.0; m],
            lm: 0.0,
            states: self.ctc.iter().map(|s| s.initial_state()).collect(),
        }
    }

    fn attention_rows(&self, prefix: &[TokenId]) -> Result<Vec<Vec<f64>>> {
        let n = self.vocab.len();
        let score = |m: &ModelInput| -> Result<Vec<f64>> {
            let row = m.attention.score(prefix)?;
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "attention returned {} scores for {n} tokens",
                    row.len()
                )));
            }
            Ok(row)
        };
        if self.models.len() > 1 {
            self.models.par_iter().map(score).collect()
        } else {
            self.models.iter().map(score).collect()
        }
    }

    /// Scores `candidates` as extensions of `hyp`. Returns the candidate
    /// scores and the extended CTC states, indexed `[candidate][model]`.
    fn score(
        &self,
        hyp: &Hyp,
        att: &[Vec<f64>],
        candidates: &[TokenId],
    ) -> Result<(Vec<CandidateScore>, Vec<Vec<CtcPrefixState>>)> {
        let step = |(scorer, state): (&CtcPrefixScorer, &CtcPrefixState)| {
            scorer.score_step(&hyp.tokens, state, candidates)
        };
        let pairs = self.ctc.iter().zip(&hyp.states);
        let ctc: Vec<Vec<(f64, CtcPrefixState)>> = if self.models.len() > 1 {
            pairs
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(step)
                .collect::<Result<_>>()?
        } else {
            pairs.map(step).collect::<Result<_>>()?
        };
        let lm_row = match self.lm {
            Some(lm) => Some(lm.score(&hyp.tokens)?),
            None => None,
        };

        let mut scores = Vec::with_capacity(candidates.len());
        let mut states = Vec::with_capacity(candidates.len());
        for (k, &c) in candidates.iter().enumerate() {
            let mut per_scorer = Vec::with_capacity(self.models.len());
            let mut next = Vec::with_capacity(self.models.len());
            for i in 0..self.models.len() {
                let (psi, st) = &ctc[i][k];
                per_scorer.push([att[i][c], psi - hyp.states[i].prefix_logp]);
                next.push(st.clone());
            }
            let combined = weighted_sum(&per_scorer, self.w.alpha());
            let lm = lm_row.as_ref().map_or(0.0, |r| r[c]);
            let total = if self.lm.is_some() {
                combined + self.w.lm_weight() * lm
            } else {
                combined
            };
            scores.push(CandidateScore {
                token: c,
                per_scorer,
                lm,
                combined,
                total,
            });
            states.push(next);
        }
        Ok((scores, states))
    }

    /// Tokens a hypothesis with `labels` output tokens may be extended by.
    fn allowed(&self, labels: usize, maxlen: usize, minlen: usize) -> Vec<TokenId> {
        let eos = self.vocab.eos();
        if labels >= maxlen {
            return vec![eos];
        }
        self.vocab
            .extension_tokens()
            .into_iter()
            .filter(|&c| c != eos || labels >= minlen)
            .collect()
    }
}

/// Scores every allowed extension of `prefix` (starting with sos) without
/// pre-beam pruning.
pub fn score_candidates(
    models: &[ModelInput],
    lm: Option<&LmScorer>,
    vocab: &Vocabulary,
    w: &FusionWeights,
    prefix: &[TokenId],
) -> Result<Vec<CandidateScore>> {
    let search = Search::new(models, lm, vocab, w)?;
    let mut hyp = search.initial();
    for &t in prefix.iter().skip(1) {
        vocab.check(t)?;
    }
    if prefix.first() != Some(&vocab.sos()) {
        return Err(Error::InvalidToken("prefix must start with sos".into()));
    }
    hyp.states = search
        .ctc
        .iter()
        .map(|s| s.state_for(prefix))
        .collect::<Result<_>>()?;
    hyp.tokens = prefix.to_vec();
    let att = search.attention_rows(prefix)?;
    let candidates = search.vocab.extension_tokens();
    Ok(search.score(&hyp, &att, &candidates)?.0)
}

/// Beam search under
/// `sum_i (alpha_i,att * att_i + alpha_i,ctc * ctc_i) + lm_weight * lm`.
///
/// The length cap comes from the shortest model input. A hypothesis holding
/// `maxlen` tokens can only be extended by eos, so every returned entry has
/// been scored through eos.
pub fn ensemble_beam_search(
    models: &[ModelInput],
    lm: Option<&LmScorer>,
    vocab: &Vocabulary,
    w: &FusionWeights,
    cfg: &DecodeConfig,
) -> Result<DecodeResult> {
    cfg.validate()?;
    let search = Search::new(models, lm, vocab, w)?;
    let frames = models
        .iter()
        .map(|m| m.speech_frames)
        .min()
        .unwrap_or(1)
        .max(1);
    let maxlen = max_output_length(frames, cfg);
    let eos = vocab.eos();

    let mut running = vec![search.initial()];
    let mut ended: Vec<(Hyp, bool)> = Vec::new();
    while !running.is_empty() {
        let mut pool: Vec<Hyp> = Vec::new();
        for hyp in &running {
            let labels = hyp.tokens.len() - 1;
            let allowed = search.allowed(labels, maxlen, cfg.minlen);
            let att = search.attention_rows(&hyp.tokens)?;
            let candidates = pre_beam_select(&att, w, cfg.pre_beam(), &allowed)?;
            let (scores, states) = search.score(hyp, &att, &candidates)?;
            for (s, st) in scores.into_iter().zip(states) {
                let mut tokens = hyp.tokens.clone();
                tokens.push(s.token);
                pool.push(Hyp {
                    tokens,
                    score: hyp.score + s.total,
                    att: hyp
                        .att
                        .iter()
                        .zip(&s.per_scorer)
                        .map(|(a, p)| a + p[ATT])
                        .collect(),
                    ctc: hyp
                        .ctc
                        .iter()
                        .zip(&s.per_scorer)
                        .map(|(a, p)| a + p[CTC])
                        .collect(),
                    lm: hyp.lm + s.lm,
                    states: st,
                });
            }
        }
        pool.sort_by(|a, b| rank(a.score, &a.tokens, b.score, &b.tokens));
        pool.truncate(cfg.beam_size);
        running.clear();
        for h in pool {
            if h.tokens.last() == Some(&eos) {
                let hit = h.tokens.len() - 2 >= maxlen;
                ended.push((h, hit));
            } else {
                running.push(h);
            }
        }
    }

    ended.sort_by(|a, b| rank(a.0.score, &a.0.tokens, b.0.score, &b.0.tokens));
    ended.truncate(cfg.nbest_size());
    let nbest = ended
        .into_iter()
        .map(|(h, hit_maxlen)| NBestEntry {
            tokens: h.tokens[1..h.tokens.len() - 1].to_vec(),
            score: h.score,
            breakdown: ScoreBreakdown {
                attention: h.att,
                ctc: h.ctc,
                lm: h.lm,
            },
            hit_maxlen,
        })
        .collect();
    Ok(DecodeResult { nbest, maxlen })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::joint_score_single;
    use crate::math::log_softmax;
    use crate::scoring::{ctc_full_sequence_logprob, ctc_prefix_score_step, NGramLm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::hash_map::DefaultHasher;
    use std::hash::{Hash, Hasher};

    /// Attention whose distribution depends on the whole prefix.
    struct Hashed {
        n: usize,
        seed: u64,
    }

    impl AttentionScorer for Hashed {
        fn vocab_size(&self) -> usize {
            self.n
        }

        fn score(&self, prefix: &[TokenId]) -> Result<Vec<f64>> {
            let mut h = DefaultHasher::new();
            (self.seed, prefix).hash(&mut h);
            let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
            Ok(log_softmax(
                &(0..self.n)
                    .map(|_| rng.gen_range(-3.0..3.0))
                    .collect::<Vec<_>>(),
            ))
        }
    }

    fn vocab(n: usize) -> Vocabulary {
        let mut t = vec!["<blank>".to_string(), "<sos/eos>".to_string()];
        t.extend((2..n).map(|i| ((b'a' + i as u8 - 2) as char).to_string()));
        Vocabulary::new(t, 0, 1, 1).unwrap()
    }

    fn grid(rng: &mut ChaCha8Rng, t: usize, n: usize) -> CtcPosteriorGrid {
        let rows = (0..t)
            .map(|_| log_softmax(&(0..n).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<_>>()))
            .collect();
        CtcPosteriorGrid::new(rows, 0).unwrap()
    }

    fn unigram_lm(rng: &mut ChaCha8Rng, vocab: &Vocabulary) -> NGramLm {
        let words: Vec<String> = std::iter::once("</s>".to_string())
            .chain(
                vocab
                    .label_tokens()
                    .map(|i| vocab.token(i).unwrap().to_string()),
            )
            .collect();
        let raw: Vec<f64> = words.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut arpa = format!(
            "\\data\\\nngram 1={}\n\n\\1-grams:\n-99\t<s>\t0\n",
            words.len() + 1
        );
        for (w, p) in words.iter().zip(raw) {
            arpa += &format!("{:.17}\t{w}\n", (p / total).log10());
        }
        arpa += "\n\\end\\\n";
        NGramLm::from_arpa(&arpa).unwrap()
    }

    /// Objective of a complete sequence, summed directly.
    fn objective(
        models: &[ModelInput],
        lm: Option<&LmScorer>,
        w: &FusionWeights,
        vocab: &Vocabulary,
        labels: &[TokenId],
    ) -> f64 {
        let mut full = vec![vocab.sos()];
        full.extend_from_slice(labels);
        full.push(vocab.eos());
        let mut total = 0.0;
        for (m, a) in models.iter().zip(w.alpha()) {
            let att: f64 = (1..full.len())
                .map(|n| m.attention.score(&full[..n]).unwrap()[full[n]])
                .sum();
            total += a[ATT] * att + a[CTC] * ctc_full_sequence_logprob(m.grid, labels).unwrap();
        }
        if let Some(lm) = lm {
            let l: f64 = (1..full.len())
                .map(|n| lm.score(&full[..n]).unwrap()[full[n]])
                .sum();
            total += w.lm_weight() * l;
        }
        total
    }

    fn sequences(labels: &[TokenId], maxlen: usize) -> Vec<Vec<TokenId>> {
        let mut out = vec![vec![]];
        let mut frontier = vec![vec![]];
        for _ in 0..maxlen {
            let mut next = vec![];
            for s in &frontier {
                for &c in labels {
                    let mut e: Vec<TokenId> = s.clone();
                    e.push(c);
                    next.push(e);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    #[test]
    fn matches_enumeration_without_pruning() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..60 {
            let n = rng.gen_range(3..=4);
            let m = rng.gen_range(1..=2);
            let vocab = vocab(n);
            let grids: Vec<_> = (0..m)
                .map(|_| {
                    let t = rng.gen_range(1..=5);
                    grid(&mut rng, t, n)
                })
                .collect();
            let atts: Vec<_> = (0..m)
                .map(|i| Hashed {
                    n,
                    seed: case * 10 + i as u64,
                })
                .collect();
            let frames = [7, 14, 20][rng.gen_range(0..3)];
            let models: Vec<_> = (0..m)
                .map(|i| ModelInput {
                    attention: &atts[i],
                    grid: &grids[i],
                    speech_frames: frames,
                })
                .collect();
            let raw: Vec<[f64; 2]> = (0..m)
                .map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
                .collect();
            let s: f64 = raw.iter().flatten().sum();
            let w = FusionWeights::new(
                raw.iter().map(|r| [r[0] / s, r[1] / s]).collect(),
                rng.gen_range(0.0..2.0),
            );
            let w = w.unwrap_or_else(|_| FusionWeights::uniform(m, 0.5).unwrap());
            let lm_model = unigram_lm(&mut rng, &vocab);
            let lm_scorer = LmScorer::new(&lm_model, &vocab);
            let lm = (case % 2 == 0).then_some(&lm_scorer);

            let cfg = DecodeConfig {
                beam_size: 64,
                pre_beam_size: Some(64),
                ..DecodeConfig::default()
            };
            let res = ensemble_beam_search(&models, lm, &vocab, &w, &cfg).unwrap();
            let maxlen = max_output_length(frames, &cfg);
            let labels: Vec<_> = vocab.label_tokens().collect();
            let mut best: Option<(f64, Vec<TokenId>)> = None;
            for seq in sequences(&labels, maxlen) {
                let v = objective(&models, lm, &w, &vocab, &seq);
                if best.as_ref().is_none_or(|(b, _)| v > *b) {
                    best = Some((v, seq));
                }
            }
            let (bv, bs) = best.unwrap();
            let top = res.best().unwrap();
            assert_eq!(top.tokens, bs, "case {case}");
            assert!(
                (top.score - bv).abs() <= 1e-9,
                "case {case}: {} vs {bv}",
                top.score
            );
        }
    }

    /// Straightforward single-model joint decoder.
    fn reference_decode(
        att: &dyn AttentionScorer,
        grid: &CtcPosteriorGrid,
        vocab: &Vocabulary,
        lambda: f64,
        beam: usize,
        maxlen: usize,
    ) -> (Vec<TokenId>, f64) {
        let (sos, eos) = (vocab.sos(), vocab.eos());
        let mut live = vec![(vec![sos], 0.0f64, CtcPrefixState::initial(grid))];
        let mut done: Vec<(Vec<TokenId>, f64)> = vec![];
        while !live.is_empty() {
            let mut pool = vec![];
            for (p, s, st) in &live {
                let a = att.score(p).unwrap();
                let cands: Vec<TokenId> = if p.len() > maxlen {
                    vec![eos]
                } else {
                    vocab.extension_tokens()
                };
                let ctc = ctc_prefix_score_step(grid, sos, eos, p, st, &cands).unwrap();
                for (&c, (psi, nst)) in cands.iter().zip(ctc) {
                    let mut q = p.clone();
                    q.push(c);
                    let step = joint_score_single(a[c], psi - st.prefix_logp, lambda);
                    pool.push((q, s + step, nst));
                }
            }
            pool.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
            pool.truncate(beam);
            live.clear();
            for (q, s, st) in pool {
                if q.last() == Some(&eos) {
                    done.push((q, s));
                } else {
                    live.push((q, s, st));
                }
            }
        }
        done.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        let (q, s) = done.swap_remove(0);
        (q[1..q.len() - 1].to_vec(), s)
    }

    #[test]
    fn single_model_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..40 {
            let n = rng.gen_range(3..=6);
            let vocab = vocab(n);
            let t = rng.gen_range(2..=12);
            let g = grid(&mut rng, t, n);
            let att = Hashed { n, seed: case };
            let frames = rng.gen_range(10..60);
            let beam = rng.gen_range(1..=4);
            let models = [ModelInput {
                attention: &att,
                grid: &g,
                speech_frames: frames,
            }];
            let cfg = DecodeConfig {
                beam_size: beam,
                pre_beam_size: Some(n.max(beam)),
                ..DecodeConfig::default()
            };
            let w = FusionWeights::single(0.3, 0.0).unwrap();
            let res = ensemble_beam_search(&models, None, &vocab, &w, &cfg).unwrap();
            let (seq, score) = reference_decode(&att, &g, &vocab, 0.3, beam, res.maxlen);
            let top = res.best().unwrap();
            assert_eq!(top.tokens, seq);
            assert!((top.score - score).abs() <= 1e-9);
        }
    }

    #[test]
    fn step_scores_reduce_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vocab = vocab(5);
        let g = grid(&mut rng, 6, 5);
        let att = Hashed { n: 5, seed: 1 };
        let models = [ModelInput {
            attention: &att,
            grid: &g,
            speech_frames: 40,
        }];
        let w = FusionWeights::new(vec![[0.7, 0.3]], 0.0).unwrap();
        for prefix in [vec![1], vec![1, 2], vec![1, 3, 3, 4]] {
            for c in score_candidates(&models, None, &vocab, &w, &prefix).unwrap() {
                let [a, k] = c.per_scorer[0];
                assert_eq!(
                    c.combined.to_bits(),
                    joint_score_single(a, k, 0.3).to_bits()
                );
                assert_eq!(c.total.to_bits(), c.combined.to_bits());
            }
        }
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vocab = vocab(5);
        let grids = [
            grid(&mut rng, 8, 5),
            grid(&mut rng, 9, 5),
            grid(&mut rng, 7, 5),
        ];
        let atts = [
            Hashed { n: 5, seed: 1 },
            Hashed { n: 5, seed: 2 },
            Hashed { n: 5, seed: 3 },
        ];
        let w = FusionWeights::new(vec![[0.2, 0.1], [0.3, 0.05], [0.25, 0.1]], 0.0).unwrap();
        let order = [2, 0, 1];
        let build = |ord: &[usize]| -> Vec<ModelInput> {
            ord.iter()
                .map(|&i| ModelInput {
                    attention: &atts[i],
                    grid: &grids[i],
                    speech_frames: 50,
                })
                .collect()
        };
        let cfg = DecodeConfig::with_beam(3);
        let a = ensemble_beam_search(&build(&[0, 1, 2]), None, &vocab, &w, &cfg).unwrap();
        let b = ensemble_beam_search(
            &build(&order),
            None,
            &vocab,
            &w.permuted(&order).unwrap(),
            &cfg,
        )
        .unwrap();
        assert_eq!(a.nbest.len(), b.nbest.len());
        for (x, y) in a.nbest.iter().zip(&b.nbest) {
            assert_eq!(x.tokens, y.tokens);
            assert!((x.score - y.score).abs() <= 1e-9);
        }
    }

    #[test]
    fn nbest_sorted_and_scores_decrease() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vocab = vocab(6);
        let g = grid(&mut rng, 10, 6);
        let att = Hashed { n: 6, seed: 4 };
        let models = [ModelInput {
            attention: &att,
            grid: &g,
            speech_frames: 30,
        }];
        let w = FusionWeights::uniform(1, 0.0).unwrap();
        let res =
            ensemble_beam_search(&models, None, &vocab, &w, &DecodeConfig::with_beam(4)).unwrap();
        assert_eq!(res.nbest.len(), 4);
        for pair in res.nbest.windows(2) {
            assert!(pair[0].score >= pair[1].score);
        }
        for e in &res.nbest {
            assert!(e.score <= 0.0);
            assert!(e.tokens.len() <= res.maxlen);
            let b = &e.breakdown;
            let recomposed = 0.7 * b.attention[0] + 0.3 * b.ctc[0];
            assert!((recomposed - e.score).abs() < 1e-9);
            let direct = ctc_full_sequence_logprob(&g, &e.tokens).unwrap();
            assert!((b.ctc[0] - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn minlen_and_maxlen() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let vocab = vocab(4);
        let g = grid(&mut rng, 6, 4);
        let att = Hashed { n: 4, seed: 8 };
        let models = [ModelInput {
            attention: &att,
            grid: &g,
            speech_frames: 14,
        }];
        let w = FusionWeights::uniform(1, 0.0).unwrap();
        let cfg = DecodeConfig {
            minlen: 2,
            nbest: Some(20),
            beam_size: 20,
            ..DecodeConfig::default()
        };
        let res = ensemble_beam_search(&models, None, &vocab, &w, &cfg).unwrap();
        assert_eq!(res.maxlen, 2);
        assert!(res
            .nbest
            .iter()
            .all(|e| e.tokens.len() == 2 && e.hit_maxlen));
        assert_eq!(res.nbest.len(), 4);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vocab = vocab(4);
        let g = grid(&mut rng, 4, 4);
        let g5 = grid(&mut rng, 4, 5);
        let att = Hashed { n: 4, seed: 0 };
        let w = FusionWeights::uniform(1, 0.0).unwrap();
        let cfg = DecodeConfig::default();
        assert!(ensemble_beam_search(&[], None, &vocab, &w, &cfg).is_err());
        let bad = [ModelInput {
            attention: &att,
            grid: &g5,
            speech_frames: 10,
        }];
        assert!(ensemble_beam_search(&bad, None, &vocab, &w, &cfg).is_err());
        let ok = [ModelInput {
            attention: &att,
            grid: &g,
            speech_frames: 10,
        }];
        let w2 = FusionWeights::uniform(2, 0.0).unwrap();
        assert!(ensemble_beam_search(&ok, None, &vocab, &w2, &cfg).is_err());
    }

    #[test]
    fn pre_beam_selection() {
        let w = FusionWeights::new(vec![[0.5, 0.0], [0.5, 0.0]], 0.0).unwrap();
        let a = vec![0.0, -1.0, -2.0, -3.0, -4.0];
        let b = vec![0.0, -4.0, -3.0, -2.0, -1.0];
        let allowed = [1, 2, 3, 4];
        // means: 1 -> -2.5, 2 -> -2.5, 3 -> -2.5, 4 -> -2.5
        assert_eq!(
            pre_beam_select(&[a.clone(), b.clone()], &w, 2, &allowed).unwrap(),
            vec![1, 2]
        );
        let w1 = FusionWeights::new(vec![[1.0, 0.0]], 0.0).unwrap();
        assert_eq!(
            pre_beam_select(std::slice::from_ref(&b), &w1, 2, &allowed).unwrap(),
            vec![3, 4]
        );
        assert_eq!(
            pre_beam_select(&[b], &w1, 9, &allowed).unwrap(),
            allowed.to_vec()
        );
        let c = vec![0.0, -0.5, -3.0, -2.0, -0.5];
        assert_eq!(
            pre_beam_select(&[a, c], &w, 2, &allowed).unwrap(),
            vec![1, 4]
        );
    }
}
