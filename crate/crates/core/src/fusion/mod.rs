//! Score fusion and ensemble decoding.

mod config;
mod search;
mod weights;

pub use config::{max_output_length, DecodeConfig};
pub use search::{
    ensemble_beam_search, pre_beam_select, score_candidates, CandidateScore, DecodeResult,
    ModelInput, NBestEntry, ScoreBreakdown,
};
pub use weights::{
    combined_score, ensemble_lm_weight, joint_score_single, FusionWeights, ATT, CTC,
    DEFAULT_CTC_WEIGHT, LM_WEIGHT_PER_MODEL,
};
