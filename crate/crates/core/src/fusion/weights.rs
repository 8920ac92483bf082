use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CTC share of each model's score in the default configuration.
pub const DEFAULT_CTC_WEIGHT: f64 = 0.3;

/// LM weight contributed by every model of the ensemble.
pub const LM_WEIGHT_PER_MODEL: f64 = 0.6;

const SIMPLEX_TOL: f64 = 1e-9;

/// Index of the attention column of `alpha`.
pub const ATT: usize = 0;
/// Index of the CTC column of `alpha`.
pub const CTC: usize = 1;

/// Per-(model, scorer) combination weights plus the additive LM weight.
///
/// `alpha[i] = [attention, ctc]` for model `i`. Every entry is non-negative
/// and all entries sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    alpha: Vec<[f64; 2]>,
    lm_weight: f64,
}

impl FusionWeights {
    pub fn new(alpha: Vec<[f64; 2]>, lm_weight: f64) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidWeights("need at least one model".into()));
        }
        if alpha.iter().flatten().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::InvalidWeights(
                "alpha entries must be finite and >= 0".into(),
            ));
        }
        let total: f64 = alpha.iter().flatten().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidWeights(format!(
                "alpha sums to {total}, not 1"
            )));
        }
        if !lm_weight.is_finite() || lm_weight < 0.0 {
            return Err(Error::InvalidWeights(format!(
                "lm weight {lm_weight} must be >= 0"
            )));
        }
        Ok(Self { alpha, lm_weight })
    }

    /// One model: `alpha = (1 - lambda, lambda)`.
    pub fn single(ctc_weight: f64, lm_weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&ctc_weight) {
            return Err(Error::InvalidWeights(format!(
                "lambda {ctc_weight} not in [0, 1]"
            )));
        }
        Self::new(vec![[1.0 - ctc_weight, ctc_weight]], lm_weight)
    }

    /// `0.7 / M` attention and `0.3 / M` CTC for each of `M` models.
    pub fn uniform(num_models: usize, lm_weight: f64) -> Result<Self> {
        if num_models == 0 {
            return Err(Error::InvalidWeights("need at least one model".into()));
        }
        let m = num_models as f64;
        let row = [(1.0 - DEFAULT_CTC_WEIGHT) / m, DEFAULT_CTC_WEIGHT / m];
        Self::new(vec![row; num_models], lm_weight)
    }

    /// Models weighted by inverse development error, keeping the overall
    /// 0.7 / 0.3 attention/CTC split.
    pub fn validation_weighted(dev_errors: &[f64], lm_weight: f64) -> Result<Self> {
        if dev_errors.is_empty() {
            return Err(Error::InvalidWeights("need at least one model".into()));
        }
        if dev_errors.iter().any(|e| !e.is_finite() || *e <= 0.0) {
            return Err(Error::InvalidWeights(
                "development errors must be finite and > 0".into(),
            ));
        }
        let inv_total: f64 = dev_errors.iter().map(|e| 1.0 / e).sum();
        let alpha = dev_errors
            .iter()
            .map(|e| {
                let share = (1.0 / e) / inv_total;
                [
                    (1.0 - DEFAULT_CTC_WEIGHT) * share,
                    DEFAULT_CTC_WEIGHT * share,
                ]
            })
            .collect();
        Self::new(alpha, lm_weight)
    }

    pub fn num_models(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[[f64; 2]] {
        &self.alpha
    }

    pub fn lm_weight(&self) -> f64 {
        self.lm_weight
    }

    pub fn with_lm_weight(mut self, lm_weight: f64) -> Result<Self> {
        if !lm_weight.is_finite() || lm_weight < 0.0 {
            return Err(Error::InvalidWeights(format!(
                "lm weight {lm_weight} must be >= 0"
            )));
        }
        self.lm_weight = lm_weight;
        Ok(self)
    }

    /// Total attention mass; zero means attention cannot rank candidates.
    pub fn attention_mass(&self) -> f64 {
        self.alpha.iter().map(|a| a[ATT]).sum()
    }

    /// Reorders the rows: row `k` of the result is row `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.alpha.len()];
        if order.len() != self.alpha.len()
            || order
                .iter()
                .any(|&i| i >= seen.len() || std::mem::replace(&mut seen[i], true))
        {
            return Err(Error::InvalidWeights(format!(
                "{order:?} is not a permutation"
            )));
        }
        Ok(Self {
            alpha: order.iter().map(|&i| self.alpha[i]).collect(),
            lm_weight: self.lm_weight,
        })
    }
}

/// Single-model joint score: `lambda * ctc + (1 - lambda) * att`.
pub fn joint_score_single(att_logp: f64, ctc_logp: f64, lambda: f64) -> f64 {
    lambda * ctc_logp + (1.0 - lambda) * att_logp
}

/// `sum_i sum_j alpha_ij * score_ij`, accumulated model by model, attention
/// before CTC.
pub fn combined_score(scores: &[[f64; 2]], w: &FusionWeights) -> Result<f64> {
    if scores.len() != w.num_models() {
        return Err(Error::DimensionMismatch(format!(
            "{} score rows for {} models",
            scores.len(),
            w.num_models()
        )));
    }
    Ok(weighted_sum(scores, w.alpha()))
}

pub(crate) fn weighted_sum(scores: &[[f64; 2]], alpha: &[[f64; 2]]) -> f64 {
    let mut acc = 0.0;
    for (s, a) in scores.iter().zip(alpha) {
        acc += a[ATT] * s[ATT];
        acc += a[CTC] * s[CTC];
    }
    acc
}

/// LM weight for an ensemble of `num_models` models.
pub fn ensemble_lm_weight(num_models: usize, base: f64) -> f64 {
    base * num_models as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_score_endpoints() {
        let (att, ctc) = (-1.25, -3.5);
        assert_eq!(joint_score_single(att, ctc, 0.0), att);
        assert_eq!(joint_score_single(att, ctc, 1.0), ctc);
        let half = 0.5f64.ln();
        assert!((joint_score_single(half, half, 0.3) - half).abs() < 1e-15);
    }

    #[test]
    fn combined_reduces_to_joint() {
        let w = FusionWeights::new(vec![[0.7, 0.3]], 0.0).unwrap();
        for (att, ctc) in [(-0.1, -2.0), (-5.5, -0.01), (0.0, -1e-3)] {
            let c = combined_score(&[[att, ctc]], &w).unwrap();
            assert_eq!(c.to_bits(), joint_score_single(att, ctc, 0.3).to_bits());
        }
    }

    #[test]
    fn combined_degenerate_and_mean() {
        let w = FusionWeights::new(vec![[1.0, 0.0], [0.0, 0.0]], 0.0).unwrap();
        assert_eq!(
            combined_score(&[[-2.0, -7.0], [-1.0, -1.0]], &w).unwrap(),
            -2.0
        );
        let w = FusionWeights::new(vec![[0.25, 0.25], [0.25, 0.25]], 0.0).unwrap();
        assert_eq!(
            combined_score(&[[0.0, -1.0], [-2.0, -3.0]], &w).unwrap(),
            -1.5
        );
        assert!(combined_score(&[[0.0, -1.0]], &w).is_err());
    }

    #[test]
    fn weight_validation() {
        assert!(FusionWeights::new(vec![], 0.0).is_err());
        assert!(FusionWeights::new(vec![[0.5, 0.6]], 0.0).is_err());
        assert!(FusionWeights::new(vec![[1.2, -0.2]], 0.0).is_err());
        assert!(FusionWeights::new(vec![[0.7, 0.3]], -1.0).is_err());
        assert!(FusionWeights::single(1.5, 0.0).is_err());
    }

    #[test]
    fn uniform_split() {
        let w = FusionWeights::uniform(2, 0.0).unwrap();
        assert_eq!(w.alpha(), &[[0.35, 0.15], [0.35, 0.15]]);
        let w = FusionWeights::uniform(3, 0.0).unwrap();
        assert!((w.alpha().iter().flatten().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn validation_weighting() {
        let w = FusionWeights::validation_weighted(&[2.0, 4.0], 0.0).unwrap();
        let a = w.alpha();
        assert!((a[0][0] - 0.7 * 2.0 / 3.0).abs() < 1e-12);
        assert!((a[1][1] - 0.3 / 3.0).abs() < 1e-12);
        assert!(FusionWeights::validation_weighted(&[0.0], 0.0).is_err());
    }

    #[test]
    fn lm_weight_rule() {
        assert_eq!(ensemble_lm_weight(1, LM_WEIGHT_PER_MODEL), 0.6);
        assert_eq!(ensemble_lm_weight(2, LM_WEIGHT_PER_MODEL), 1.2);
        assert!((ensemble_lm_weight(4, LM_WEIGHT_PER_MODEL) - 2.4).abs() < 1e-12);
    }

    #[test]
    fn permutation() {
        let w = FusionWeights::new(vec![[0.1, 0.2], [0.3, 0.4]], 0.5).unwrap();
        let p = w.permuted(&[1, 0]).unwrap();
        assert_eq!(p.alpha(), &[[0.3, 0.4], [0.1, 0.2]]);
        assert!(w.permuted(&[0, 0]).is_err());
        assert!(w.permuted(&[0]).is_err());
    }
}
