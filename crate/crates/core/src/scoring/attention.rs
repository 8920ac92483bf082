use super::encoder::EncodedUtterance;
use super::vocab::TokenId;
use crate::error::{Error, Result};
use crate::math::log_softmax;
use crate::tensor::Tensor;

/// A full scorer: next-token log-distribution over the whole vocabulary
/// given the hypothesis so far (starting with sos).
pub trait AttentionScorer: Sync {
    fn vocab_size(&self) -> usize;

    fn score(&self, prefix: &[TokenId]) -> Result<Vec<f64>>;
}

/// The smallest decoder whose output depends on both the prefix and the
/// input: `logits = [emb(last) ; mean(h) * C] * W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyAttentionDecoder {
    /// `N x E`.
    pub embedding: Tensor,
    /// `D' x E`.
    pub context: Tensor,
    /// `2E x N`.
    pub output: Tensor,
    /// `N`.
    pub bias: Vec<f64>,
}

impl ToyAttentionDecoder {
    pub fn vocab_size(&self) -> usize {
        self.bias.len()
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.cols()
    }

    pub fn validate(&self, encoder_dim: usize) -> Result<()> {
        let n = self.vocab_size();
        let e = self.embed_dim();
        let checks = [
            ("embedding", &self.embedding, [n, e]),
            ("context", &self.context, [encoder_dim, e]),
            ("output", &self.output, [2 * e, n]),
        ];
        for (name, t, expected) in checks {
            if t.shape != expected {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has shape {:?}, expected {expected:?}",
                    t.shape
                )));
            }
        }
        Ok(())
    }

    /// Precomputes the input-dependent half of the decoder state.
    pub fn bind<'a>(&'a self, h: &EncodedUtterance) -> Result<BoundAttention<'a>> {
        self.validate(h.dim())?;
        Ok(BoundAttention {
            decoder: self,
            context: self.context.left_mul(&h.mean_pooled()),
        })
    }
}

/// A [`ToyAttentionDecoder`] attached to one utterance.
#[derive(Clone, Debug)]
pub struct BoundAttention<'a> {
    decoder: &'a ToyAttentionDecoder,
    context: Vec<f64>,
}

impl AttentionScorer for BoundAttention<'_> {
    fn vocab_size(&self) -> usize {
        self.decoder.vocab_size()
    }

    fn score(&self, prefix: &[TokenId]) -> Result<Vec<f64>> {
        let n = self.vocab_size();
        let last = *prefix
            .last()
            .ok_or_else(|| Error::InvalidToken("prefix must start with sos".into()))?;
        if let Some(&bad) = prefix.iter().find(|&&t| t >= n) {
            return Err(Error::InvalidToken(format!(
                "token id {bad} out of range for {n}"
            )));
        }
        let mut input = self.decoder.embedding.row(last).to_vec();
        input.extend_from_slice(&self.context);
        let mut logits = self.decoder.output.left_mul(&input);
        logits
            .iter_mut()
            .zip(&self.decoder.bias)
            .for_each(|(l, b)| *l += b);
        Ok(log_softmax(&logits))
    }
}

/// `log p_att(. | prefix, h)` for the toy decoder.
pub fn attention_score_step(
    decoder: &ToyAttentionDecoder,
    h: &EncodedUtterance,
    prefix: &[TokenId],
) -> Result<Vec<f64>> {
    decoder.bind(h)?.score(prefix)
}

/// A fixed table of next-token distributions keyed by the last token.
/// Handy for constructing scorers with known behaviour.
#[derive(Clone, Debug, PartialEq)]
pub struct BigramAttention {
    /// `rows[last]` is the log-distribution after `last`.
    pub rows: Vec<Vec<f64>>,
}

impl AttentionScorer for BigramAttention {
    fn vocab_size(&self) -> usize {
        self.rows.len()
    }

    fn score(&self, prefix: &[TokenId]) -> Result<Vec<f64>> {
        let last = *prefix
            .last()
            .ok_or_else(|| Error::InvalidToken("empty prefix".into()))?;
        self.rows
            .get(last)
            .cloned()
            .ok_or_else(|| Error::InvalidToken(format!("token id {last} out of range")))
    }
}
