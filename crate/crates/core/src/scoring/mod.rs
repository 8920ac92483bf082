//! Scorers: toy encoder and attention decoder, CTC prefix scoring, and
//! the n-gram language model.

mod attention;
mod ctc;
mod encoder;
mod lm;
mod model;
mod vocab;

pub use attention::{
    attention_score_step, AttentionScorer, BigramAttention, BoundAttention, ToyAttentionDecoder,
};
pub use ctc::{ctc_full_sequence_logprob, ctc_prefix_score_step, CtcPrefixScorer, CtcPrefixState};
pub use encoder::{toy_encode, CtcPosteriorGrid, EncodedUtterance, ToyEncoder};
pub use lm::{lm_score_step, LmScorer, NGramLm, SENTENCE_END, SENTENCE_START, UNKNOWN};
pub use model::{ToyModel, TOYM1_FORMAT};
pub use vocab::{TokenId, TokenUnit, Vocabulary, SPACE_TOKEN};
