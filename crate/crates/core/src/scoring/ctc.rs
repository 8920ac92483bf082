//! CTC prefix scoring.
//!
//! For a label prefix `g` the state keeps, for every frame `t`, the log
//! probability of all alignments of `x[..=t]` that collapse to `g` and end in
//! a non-blank (`r_nb`) or a blank (`r_b`). Extending `g` by `c` needs one
//! pass over the frames, and the prefix probability of `g + c` (the mass of
//! all full alignments whose label starts with `g + c`) falls out of the same
//! pass.

use super::encoder::CtcPosteriorGrid;
use super::vocab::TokenId;
use crate::error::{Error, Result};
use crate::math::{is_impossible, log_add, NEG_INF};

/// Resumable per-hypothesis CTC state.
#[derive(Clone, Debug, PartialEq)]
pub struct CtcPrefixState {
    pub r_nb: Vec<f64>,
    pub r_b: Vec<f64>,
    /// `log P(prefix ...)`: mass of all alignments starting with the prefix.
    pub prefix_logp: f64,
    last: Option<TokenId>,
    len: usize,
}

impl CtcPrefixState {
    /// State of the empty prefix.
    pub fn initial(grid: &CtcPosteriorGrid) -> Self {
        let blank = grid.blank();
        let mut acc = 0.0;
        let r_b = (0..grid.num_frames())
            .map(|t| {
                acc = (acc + grid.at(t, blank)).max(NEG_INF);
                acc
            })
            .collect();
        Self {
            r_nb: vec![NEG_INF; grid.num_frames()],
            r_b,
            prefix_logp: 0.0,
            last: None,
            len: 0,
        }
    }

    pub fn label_len(&self) -> usize {
        self.len
    }

    /// `log P(labels == prefix)`: the full-sequence probability.
    pub fn final_logp(&self) -> f64 {
        let t = self.r_nb.len() - 1;
        log_add(self.r_nb[t], self.r_b[t])
    }
}

/// CTC as a partial scorer over one utterance's grid.
#[derive(Clone, Copy, Debug)]
pub struct CtcPrefixScorer<'a> {
    pub grid: &'a CtcPosteriorGrid,
    pub sos: TokenId,
    pub eos: TokenId,
}

impl<'a> CtcPrefixScorer<'a> {
    pub fn new(grid: &'a CtcPosteriorGrid, sos: TokenId, eos: TokenId) -> Result<Self> {
        let n = grid.vocab_size();
        if sos >= n || eos >= n || sos == grid.blank() || eos == grid.blank() {
            return Err(Error::InvalidToken(format!(
                "sos {sos} / eos {eos} invalid for a grid of {n} tokens with blank {}",
                grid.blank()
            )));
        }
        Ok(Self { grid, sos, eos })
    }

    pub fn initial_state(&self) -> CtcPrefixState {
        CtcPrefixState::initial(self.grid)
    }

    fn labels<'p>(&self, prefix: &'p [TokenId]) -> Result<&'p [TokenId]> {
        match prefix.split_first() {
            Some((&first, rest)) if first == self.sos => Ok(rest),
            _ => Err(Error::InvalidToken("hypothesis must start with sos".into())),
        }
    }

    /// Scores each candidate extension of `prefix` (which starts with sos).
    ///
    /// Returns `log P(prefix + c ...)` per candidate together with the
    /// extended state. The eos candidate gets the full-sequence probability of
    /// `prefix` and a copy of the parent state.
    pub fn score_step(
        &self,
        prefix: &[TokenId],
        state: &CtcPrefixState,
        candidates: &[TokenId],
    ) -> Result<Vec<(f64, CtcPrefixState)>> {
        let labels = self.labels(prefix)?;
        if state.len != labels.len() || state.last != labels.last().copied() {
            return Err(Error::StateMismatch(format!(
                "state covers {} labels ending in {:?}, prefix has {} ending in {:?}",
                state.len,
                state.last,
                labels.len(),
                labels.last()
            )));
        }
        if state.r_nb.len() != self.grid.num_frames() {
            return Err(Error::StateMismatch(
                "state belongs to a different grid".into(),
            ));
        }
        candidates
            .iter()
            .map(|&c| {
                if c == self.eos {
                    return Ok((state.final_logp(), state.clone()));
                }
                if c == self.grid.blank() {
                    return Err(Error::InvalidToken(
                        "blank cannot extend a hypothesis".into(),
                    ));
                }
                if c >= self.grid.vocab_size() || c == self.sos {
                    return Err(Error::InvalidToken(format!(
                        "candidate {c} cannot extend a hypothesis"
                    )));
                }
                Ok(self.extend(state, c))
            })
            .collect()
    }

    fn extend(&self, g: &CtcPrefixState, c: TokenId) -> (f64, CtcPrefixState) {
        let frames = self.grid.num_frames();
        let blank = self.grid.blank();
        let mut r_nb = vec![NEG_INF; frames];
        let mut r_b = vec![NEG_INF; frames];
        if g.len == 0 {
            r_nb[0] = self.grid.at(0, c);
        }
        let mut psi = r_nb[0];
        for t in 1..frames {
            // mass that may emit `c` at frame t as a new symbol
            let phi = if g.last == Some(c) {
                g.r_b[t - 1]
            } else {
                log_add(g.r_nb[t - 1], g.r_b[t - 1])
            };
            r_nb[t] = (log_add(r_nb[t - 1], phi) + self.grid.at(t, c)).max(NEG_INF);
            r_b[t] = (log_add(r_nb[t - 1], r_b[t - 1]) + self.grid.at(t, blank)).max(NEG_INF);
            psi = log_add(psi, (phi + self.grid.at(t, c)).max(NEG_INF));
        }
        let state = CtcPrefixState {
            r_nb,
            r_b,
            prefix_logp: psi,
            last: Some(c),
            len: g.len + 1,
        };
        (psi, state)
    }

    /// Recomputes the state of `prefix` from the empty state.
    pub fn state_for(&self, prefix: &[TokenId]) -> Result<CtcPrefixState> {
        let labels = self.labels(prefix)?;
        let mut state = self.initial_state();
        for (i, &c) in labels.iter().enumerate() {
            let (_, next) = self
                .score_step(&prefix[..i + 1], &state, &[c])?
                .pop()
                .expect("one candidate");
            state = next;
        }
        Ok(state)
    }
}

/// Free-function form of [`CtcPrefixScorer::score_step`].
pub fn ctc_prefix_score_step(
    grid: &CtcPosteriorGrid,
    sos: TokenId,
    eos: TokenId,
    prefix: &[TokenId],
    state: &CtcPrefixState,
    candidates: &[TokenId],
) -> Result<Vec<(f64, CtcPrefixState)>> {
    CtcPrefixScorer::new(grid, sos, eos)?.score_step(prefix, state, candidates)
}

/// `log P(labels | grid)` by the standard CTC forward recursion over the
/// blank-interleaved label sequence. Impossible labels give [`NEG_INF`].
pub fn ctc_full_sequence_logprob(grid: &CtcPosteriorGrid, labels: &[TokenId]) -> Result<f64> {
    let blank = grid.blank();
    if let Some(&bad) = labels
        .iter()
        .find(|&&l| l == blank || l >= grid.vocab_size())
    {
        return Err(Error::InvalidToken(format!(
            "label {bad} is blank or out of range"
        )));
    }
    let mut ext = Vec::with_capacity(2 * labels.len() + 1);
    ext.push(blank);
    for &l in labels {
        ext.push(l);
        ext.push(blank);
    }
    let s_len = ext.len();
    let mut alpha = vec![NEG_INF; s_len];
    alpha[0] = grid.at(0, blank);
    if s_len > 1 {
        alpha[1] = grid.at(0, ext[1]);
    }
    for t in 1..grid.num_frames() {
        let prev = alpha.clone();
        for s in 0..s_len {
            let mut acc = prev[s];
            if s >= 1 {
                acc = log_add(acc, prev[s - 1]);
            }
            if s >= 2 && ext[s] != blank && ext[s] != ext[s - 2] {
                acc = log_add(acc, prev[s - 2]);
            }
            alpha[s] = (acc + grid.at(t, ext[s])).max(NEG_INF);
        }
    }
    let total = if s_len > 1 {
        log_add(alpha[s_len - 1], alpha[s_len - 2])
    } else {
        alpha[0]
    };
    Ok(if is_impossible(total) { NEG_INF } else { total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // ids: 0 blank, 1 sos/eos, 2.. symbols
    fn uniform(frames: usize, n: usize) -> CtcPosteriorGrid {
        CtcPosteriorGrid::from_probs(&vec![vec![1.0 / n as f64; n]; frames], 0).unwrap()
    }

    fn random_grid(rng: &mut ChaCha8Rng, frames: usize, n: usize) -> CtcPosteriorGrid {
        let rows: Vec<Vec<f64>> = (0..frames)
            .map(|_| {
                let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / s).collect()
            })
            .collect();
        CtcPosteriorGrid::from_probs(&rows, 0).unwrap()
    }

    /// Collapses a frame-level path: merge repeats, drop blanks.
    fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut prev = None;
        for &p in path {
            if Some(p) != prev && p != blank {
                out.push(p);
            }
            prev = Some(p);
        }
        out
    }

    /// Sums the probability of every alignment whose collapse satisfies `keep`.
    fn enumerate(grid: &CtcPosteriorGrid, keep: impl Fn(&[usize]) -> bool) -> f64 {
        let (t, n) = (grid.num_frames(), grid.vocab_size());
        let mut total = 0.0;
        let mut path = vec![0usize; t];
        for code in 0..n.pow(t as u32) {
            let mut c = code;
            for p in path.iter_mut() {
                *p = c % n;
                c /= n;
            }
            if keep(&collapse(&path, grid.blank())) {
                total += path
                    .iter()
                    .enumerate()
                    .map(|(i, &k)| grid.at(i, k).exp())
                    .product::<f64>();
            }
        }
        total
    }

    #[test]
    fn two_frame_uniform_single_label() {
        // tokens {blank, a}: alignments a-, -a, aa collapse to "a"
        let grid = uniform(2, 2);
        let p = ctc_full_sequence_logprob(&grid, &[1]).unwrap();
        assert!((p.exp() - 0.75).abs() < 1e-12);
        assert!((enumerate(&grid, |l| l == [1]) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn deterministic_grid() {
        // frame 1 = a, frame 2 = blank
        let grid =
            CtcPosteriorGrid::from_probs(&[vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]], 0).unwrap();
        let scorer = CtcPrefixScorer::new(&grid, 1, 1).unwrap();
        assert!(ctc_full_sequence_logprob(&grid, &[2]).unwrap().abs() < 1e-12);
        assert_eq!(ctc_full_sequence_logprob(&grid, &[]).unwrap(), NEG_INF);
        let state = scorer.state_for(&[1, 2]).unwrap();
        assert!(state.final_logp().abs() < 1e-12);
        assert!(is_impossible(scorer.initial_state().final_logp()));
    }

    #[test]
    fn empty_label_on_blank_grid() {
        let grid = CtcPosteriorGrid::from_probs(&vec![vec![1.0, 0.0, 0.0]; 3], 0).unwrap();
        assert_eq!(ctc_full_sequence_logprob(&grid, &[]).unwrap(), 0.0);
    }

    #[test]
    fn too_long_label_is_impossible() {
        let grid = uniform(2, 4);
        assert_eq!(
            ctc_full_sequence_logprob(&grid, &[2, 3, 2]).unwrap(),
            NEG_INF
        );
        // repeats need a blank in between
        assert_eq!(ctc_full_sequence_logprob(&grid, &[2, 2]).unwrap(), NEG_INF);
    }

    #[test]
    fn incremental_matches_forward_and_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let frames = rng.gen_range(1..=5);
            let n = rng.gen_range(3..=4);
            let grid = random_grid(&mut rng, frames, n);
            let scorer = CtcPrefixScorer::new(&grid, 1, 1).unwrap();
            let labels: Vec<usize> = (0..rng.gen_range(0..=3))
                .map(|_| rng.gen_range(2..n))
                .collect();
            let mut prefix = vec![1];
            prefix.extend(&labels);
            let state = scorer.state_for(&prefix).unwrap();
            let full = scorer.score_step(&prefix, &state, &[1]).unwrap()[0].0;
            let forward = ctc_full_sequence_logprob(&grid, &labels).unwrap();
            let brute = enumerate(&grid, |l| l == labels.as_slice());
            if brute == 0.0 {
                assert!(is_impossible(full) && is_impossible(forward));
            } else {
                assert!((full - forward).abs() < 1e-9 * forward.abs().max(1.0));
                assert!((full.exp() - brute).abs() < 1e-9 * brute);
            }
            // prefix mass against enumeration of label prefixes
            let mass = enumerate(&grid, |l| l.starts_with(&labels));
            if mass > 0.0 {
                assert!((state.prefix_logp.exp() - mass).abs() < 1e-9 * mass);
            }
        }
    }

    #[test]
    fn prefix_mass_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let grid = random_grid(&mut rng, 6, 4);
        let scorer = CtcPrefixScorer::new(&grid, 1, 1).unwrap();
        let mut prefix = vec![1];
        let mut state = scorer.initial_state();
        for c in [2, 3, 3, 2] {
            let (logp, next) = scorer
                .score_step(&prefix, &state, &[c])
                .unwrap()
                .pop()
                .unwrap();
            assert!(logp <= state.prefix_logp + 1e-12);
            prefix.push(c);
            state = next;
        }
    }

    #[test]
    fn carried_state_equals_recomputed() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let grid = random_grid(&mut rng, 6, 4);
        let scorer = CtcPrefixScorer::new(&grid, 1, 1).unwrap();
        let (_, s1) = scorer
            .score_step(&[1], &scorer.initial_state(), &[2])
            .unwrap()
            .pop()
            .unwrap();
        let (_, s2) = scorer
            .score_step(&[1, 2], &s1, &[3])
            .unwrap()
            .pop()
            .unwrap();
        let fresh = scorer.state_for(&[1, 2, 3]).unwrap();
        for (a, b) in s2
            .r_nb
            .iter()
            .chain(&s2.r_b)
            .zip(fresh.r_nb.iter().chain(&fresh.r_b))
        {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_blank_and_mismatched_state() {
        let grid = uniform(3, 4);
        let scorer = CtcPrefixScorer::new(&grid, 1, 1).unwrap();
        let init = scorer.initial_state();
        assert!(matches!(
            scorer.score_step(&[1], &init, &[0]),
            Err(Error::InvalidToken(_))
        ));
        assert!(matches!(
            scorer.score_step(&[1, 2], &init, &[3]),
            Err(Error::StateMismatch(_))
        ));
        assert!(scorer.score_step(&[2], &init, &[3]).is_err());
    }
}
