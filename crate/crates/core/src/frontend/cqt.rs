//! Frame-synchronous constant-Q spectrogram.
//!
//! Every bin uses a Hann-windowed complex kernel of `Q * sr / f_k` samples,
//! truncated to the frame length and centered in the frame, so the output has
//! exactly one row per analysis frame.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::framing::{raw_frames, window_values};
use super::{
    AudioBuffer, FeatureMatrix, FilterbankKind, FilterbankSpec, FrameConfig, Frontend, Window,
};
use crate::error::{Error, Result};
use crate::math::floored_ln;

/// `Q = 1 / (2^(1/B) - 1)`.
pub fn cqt_quality_factor(bins_per_octave: usize) -> f64 {
    1.0 / (2f64.powf(1.0 / bins_per_octave as f64) - 1.0)
}

/// `f_k = f_min * 2^(k/B)`.
pub fn cqt_center_frequencies(f_min: f64, bins_per_octave: usize, num_bins: usize) -> Vec<f64> {
    let b = bins_per_octave as f64;
    (0..num_bins)
        .map(|k| f_min * 2f64.powf(k as f64 / b))
        .collect()
}

struct Kernel {
    offset: usize,
    taps: Vec<Complex64>,
}

fn kernels(centers: &[f64], q: f64, sr: f64, frame_len: usize) -> Vec<Kernel> {
    centers
        .iter()
        .map(|&f| {
            let len = ((q * sr / f).ceil() as usize).clamp(1, frame_len);
            let window = window_values(Window::Hann, len);
            let norm: f64 = window.iter().sum::<f64>().max(f64::MIN_POSITIVE);
            let omega = 2.0 * PI * f / sr;
            let taps = window
                .iter()
                .enumerate()
                .map(|(n, w)| Complex64::from_polar(2.0 * w / norm, -omega * n as f64))
                .collect();
            Kernel {
                offset: (frame_len - len) / 2,
                taps,
            }
        })
        .collect()
}

pub fn cqt_features(
    audio: &AudioBuffer,
    cfg: &FrameConfig,
    spec: &FilterbankSpec,
) -> Result<FeatureMatrix> {
    let bins_per_octave = match spec.kind {
        FilterbankKind::CqtLog { bins_per_octave } if bins_per_octave >= 1 => bins_per_octave,
        other => {
            return Err(Error::InvalidConfig(format!(
                "CQT needs kind cqt_log with bins_per_octave >= 1, got {other:?}"
            )))
        }
    };
    let sr = audio.sample_rate();
    cfg.validate(sr)?;
    let (f_min, f_max) = spec.band(sr)?;
    if f_min <= 0.0 {
        return Err(Error::InvalidConfig("CQT needs f_min > 0".into()));
    }
    let top = f_min * 2f64.powf(spec.num_filters as f64 / bins_per_octave as f64);
    if top > f_max {
        return Err(Error::InvalidConfig(format!(
            "CQT top bin {top:.1} Hz exceeds {f_max} Hz"
        )));
    }
    let frame_len = cfg.frame_len(sr);
    let centers = cqt_center_frequencies(f_min, bins_per_octave, spec.num_filters);
    let kernels = kernels(
        &centers,
        cqt_quality_factor(bins_per_octave),
        sr as f64,
        frame_len,
    );
    let rows = raw_frames(audio.samples(), frame_len, cfg.hop_len(sr))
        .iter()
        .map(|frame| {
            kernels
                .iter()
                .map(|k| {
                    let acc: Complex64 = k
                        .taps
                        .iter()
                        .zip(&frame[k.offset..])
                        .map(|(t, &x)| t * x)
                        .sum();
                    floored_ln(acc.norm())
                })
                .collect()
        })
        .collect();
    FeatureMatrix::from_rows(rows, Frontend::Cqt, *cfg, sr)
}
