use crate::error::{Error, Result};
use crate::frontend::{FeatureMatrix, Frontend};
use crate::math::{log_softmax, log_sum_exp, NEG_INF};
use crate::tensor::Tensor;

/// Encoder output `h`: one row of token logits per subsampled frame.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedUtterance {
    pub h: Vec<Vec<f64>>,
    pub frontend: Option<Frontend>,
}

impl EncodedUtterance {
    pub fn new(h: Vec<Vec<f64>>, frontend: Option<Frontend>) -> Result<Self> {
        let dim = h.first().map_or(0, Vec::len);
        if h.is_empty() || dim == 0 || h.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(
                "encoder output must be a non-empty matrix".into(),
            ));
        }
        if h.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "encoder output has non-finite values".into(),
            ));
        }
        Ok(Self { h, frontend })
    }

    pub fn num_frames(&self) -> usize {
        self.h.len()
    }

    pub fn dim(&self) -> usize {
        self.h[0].len()
    }

    /// Average of the rows.
    pub fn mean_pooled(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for row in &self.h {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        out.iter_mut().for_each(|o| *o /= self.h.len() as f64);
        out
    }
}

/// Per-frame CTC log-posteriors, blank included.
#[derive(Clone, Debug, PartialEq)]
pub struct CtcPosteriorGrid {
    log_probs: Vec<Vec<f64>>,
    blank: usize,
}

impl CtcPosteriorGrid {
    /// Accepts log-probability rows; each must normalize within 1e-6.
    pub fn new(log_probs: Vec<Vec<f64>>, blank: usize) -> Result<Self> {
        let n = log_probs.first().map_or(0, Vec::len);
        if log_probs.is_empty() || n < 2 || log_probs.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch(
                "CTC grid needs at least one frame and two tokens".into(),
            ));
        }
        if blank >= n {
            return Err(Error::InvalidToken(format!(
                "blank id {blank} out of range"
            )));
        }
        let mut rows = log_probs;
        for (t, row) in rows.iter_mut().enumerate() {
            if row.iter().any(|v| v.is_nan() || *v > 1e-9) {
                return Err(Error::InvalidConfig(format!(
                    "frame {t}: values must be log-probabilities"
                )));
            }
            row.iter_mut().for_each(|v| *v = v.max(NEG_INF));
            let total = log_sum_exp(row);
            if total.abs() > 1e-6 {
                return Err(Error::InvalidConfig(format!(
                    "frame {t}: row log-sum-exp is {total}, not 0"
                )));
            }
        }
        Ok(Self {
            log_probs: rows,
            blank,
        })
    }

    /// Builds a grid from probability rows (each summing to 1).
    pub fn from_probs(probs: &[Vec<f64>], blank: usize) -> Result<Self> {
        let rows = probs
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&p| if p > 0.0 { p.ln() } else { NEG_INF })
                    .collect()
            })
            .collect();
        Self::new(rows, blank)
    }

    pub fn num_frames(&self) -> usize {
        self.log_probs.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.log_probs[0].len()
    }

    pub fn blank(&self) -> usize {
        self.blank
    }

    pub fn at(&self, t: usize, token: usize) -> f64 {
        self.log_probs[t][token]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.log_probs
    }
}

/// Per-frame affine map to token logits with mean-pool decimation.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyEncoder {
    /// `D x N`.
    pub weights: Tensor,
    /// `N`.
    pub bias: Vec<f64>,
    pub subsample_factor: usize,
}

impl ToyEncoder {
    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }
}

/// Runs the toy encoder: `T' = ceil(T / subsample_factor)` rows of pooled
/// logits, and their log-softmax as the CTC grid.
pub fn toy_encode(
    features: &FeatureMatrix,
    encoder: &ToyEncoder,
    blank: usize,
) -> Result<(EncodedUtterance, CtcPosteriorGrid)> {
    if features.dim() != encoder.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "features have {} dims, encoder expects {}",
            features.dim(),
            encoder.input_dim()
        )));
    }
    if encoder.subsample_factor == 0 {
        return Err(Error::InvalidConfig("subsample factor must be >= 1".into()));
    }
    let n = encoder.output_dim();
    let h: Vec<Vec<f64>> = features
        .data()
        .chunks(features.dim() * encoder.subsample_factor)
        .map(|block| {
            let frames = block.len() / features.dim();
            let mut pooled = vec![0.0; features.dim()];
            for row in block.chunks_exact(features.dim()) {
                pooled.iter_mut().zip(row).for_each(|(p, v)| *p += v);
            }
            pooled.iter_mut().for_each(|p| *p /= frames as f64);
            let mut logits = encoder.weights.left_mul(&pooled);
            logits
                .iter_mut()
                .zip(&encoder.bias)
                .for_each(|(l, b)| *l += b);
            debug_assert_eq!(logits.len(), n);
            logits
        })
        .collect();
    let grid = CtcPosteriorGrid::new(h.iter().map(|r| log_softmax(r)).collect(), blank)?;
    Ok((EncodedUtterance::new(h, Some(features.frontend))?, grid))
}
