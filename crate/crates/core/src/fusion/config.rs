use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Beam-search settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub beam_size: usize,
    /// Candidate tokens kept per hypothesis before CTC and LM scoring.
    /// `None` means `ceil(1.5 * beam_size)`.
    pub pre_beam_size: Option<usize>,
    pub maxlen_ratio: f64,
    pub subsample_factor: usize,
    pub minlen: usize,
    /// Finished hypotheses to return; `None` means `beam_size`.
    pub nbest: Option<usize>,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            beam_size: 5,
            pre_beam_size: None,
            maxlen_ratio: 0.6,
            subsample_factor: 4,
            minlen: 0,
            nbest: None,
        }
    }
}

impl DecodeConfig {
    pub fn with_beam(beam_size: usize) -> Self {
        Self {
            beam_size,
            ..Self::default()
        }
    }

    pub fn pre_beam(&self) -> usize {
        self.pre_beam_size
            .unwrap_or_else(|| (3 * self.beam_size).div_ceil(2))
    }

    pub fn nbest_size(&self) -> usize {
        self.nbest.unwrap_or(self.beam_size)
    }

    /// Copy with every optional field filled in.
    pub fn resolved(&self) -> Self {
        Self {
            pre_beam_size: Some(self.pre_beam()),
            nbest: Some(self.nbest_size()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.beam_size == 0 {
            return bad("beam_size must be positive".into());
        }
        if self.pre_beam() < self.beam_size {
            return bad(format!(
                "pre_beam_size {} is smaller than beam_size {}",
                self.pre_beam(),
                self.beam_size
            ));
        }
        if !(self.maxlen_ratio > 0.0 && self.maxlen_ratio <= 1.0) {
            return bad(format!("maxlen_ratio {} not in (0, 1]", self.maxlen_ratio));
        }
        if self.subsample_factor == 0 {
            return bad("subsample_factor must be positive".into());
        }
        if self.nbest_size() == 0 {
            return bad("nbest must be positive".into());
        }
        Ok(())
    }
}

/// Output-length cap: `max(1, floor(maxlen_ratio * frames / subsample_factor))`.
pub fn max_output_length(speech_frames: usize, cfg: &DecodeConfig) -> usize {
    let raw = cfg.maxlen_ratio * speech_frames as f64 / cfg.subsample_factor.max(1) as f64;
    // 0.7 * 360 / 4 evaluates to 62.99999999999999
    ((raw + 1e-9).floor() as usize).max(1)
}
