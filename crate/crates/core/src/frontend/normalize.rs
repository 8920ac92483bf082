use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};

const STD_FLOOR: f64 = 1e-10;

/// Per-dimension corpus statistics, serialized as `{dims, mean, std}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub dims: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormalizationStats {
    pub fn from_json(text: &str) -> Result<Self> {
        let stats: Self = serde_json::from_str(text)?;
        stats.validate()?;
        Ok(stats)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims == 0 || self.mean.len() != self.dims || self.std.len() != self.dims {
            return Err(Error::malformed(
                "normalization stats",
                format!(
                    "dims {} with {} means and {} stds",
                    self.dims,
                    self.mean.len(),
                    self.std.len()
                ),
            ));
        }
        if self.mean.iter().any(|m| !m.is_finite())
            || self.std.iter().any(|s| !(s.is_finite() && *s > 0.0))
        {
            return Err(Error::malformed(
                "normalization stats",
                "means must be finite and stds finite and positive",
            ));
        }
        Ok(())
    }
}

/// Population mean and standard deviation per dimension over every frame.
pub fn fit_global_normalization(features: &[FeatureMatrix]) -> Result<NormalizationStats> {
    let first = features
        .first()
        .ok_or_else(|| Error::Empty("no feature matrices to fit".into()))?;
    let dims = first.dim();
    if let Some(bad) = features
        .iter()
        .find(|f| f.dim() != dims || f.frontend != first.frontend)
    {
        return Err(Error::DimensionMismatch(format!(
            "{} features of dim {} mixed with {} features of dim {}",
            first.frontend,
            dims,
            bad.frontend,
            bad.dim()
        )));
    }
    let count: usize = features.iter().map(FeatureMatrix::num_frames).sum();
    let mut mean = vec![0.0; dims];
    for row in features.iter().flat_map(|f| f.rows()) {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    // second pass around the mean for accuracy
    let mut var = vec![0.0; dims];
    for row in features.iter().flat_map(|f| f.rows()) {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var
        .into_iter()
        .map(|s| (s / count as f64).sqrt().max(STD_FLOOR))
        .collect();
    Ok(NormalizationStats { dims, mean, std })
}

fn check_dims(f: &FeatureMatrix, stats: &NormalizationStats) -> Result<()> {
    if f.dim() != stats.dims || stats.mean.len() != stats.dims || stats.std.len() != stats.dims {
        return Err(Error::DimensionMismatch(format!(
            "features have {} dims, stats have {}",
            f.dim(),
            stats.dims
        )));
    }
    Ok(())
}

pub fn apply_normalization(f: &FeatureMatrix, stats: &NormalizationStats) -> Result<FeatureMatrix> {
    check_dims(f, stats)?;
    let mut out = f.clone();
    let dims = stats.dims;
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let d = i % dims;
        *v = (*v - stats.mean[d]) / stats.std[d];
    }
    Ok(out)
}

/// Inverse of [`apply_normalization`].
pub fn remove_normalization(
    f: &FeatureMatrix,
    stats: &NormalizationStats,
) -> Result<FeatureMatrix> {
    check_dims(f, stats)?;
    let mut out = f.clone();
    let dims = stats.dims;
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let d = i % dims;
        *v = *v * stats.std[d] + stats.mean[d];
    }
    Ok(out)
}

/// `count` stripes of `width` along one axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub count: usize,
    pub width: usize,
}

/// Replaces randomly placed time and frequency stripes with the matrix mean.
pub fn spec_mask(
    f: &FeatureMatrix,
    seed: u64,
    time_masks: MaskSpec,
    freq_masks: MaskSpec,
) -> Result<FeatureMatrix> {
    let (frames, dims) = (f.num_frames(), f.dim());
    if time_masks.width > frames {
        return Err(Error::InvalidConfig(format!(
            "time mask width {} exceeds {frames} frames",
            time_masks.width
        )));
    }
    if freq_masks.width > dims {
        return Err(Error::InvalidConfig(format!(
            "frequency mask width {} exceeds {dims} dims",
            freq_masks.width
        )));
    }
    let mean = f.data().iter().sum::<f64>() / f.data().len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = f.clone();
    let data = out.data_mut();
    for _ in 0..time_masks.count {
        if time_masks.width == 0 {
            break;
        }
        let start = rng.gen_range(0..=frames - time_masks.width);
        for t in start..start + time_masks.width {
            data[t * dims..(t + 1) * dims].fill(mean);
        }
    }
    for _ in 0..freq_masks.count {
        if freq_masks.width == 0 {
            break;
        }
        let start = rng.gen_range(0..=dims - freq_masks.width);
        for t in 0..frames {
            data[t * dims + start..t * dims + start + freq_masks.width].fill(mean);
        }
    }
    Ok(out)
}
