//! ERB-spaced gammatone filterbank energies.
//!
//! Each channel is an n-th order gammatone approximated by shifting the
//! channel's center frequency to DC, running a cascade of identical one-pole
//! low-pass sections, and shifting back. The cascade gives the asymmetric
//! envelope `t^(n-1) e^(-2 pi b t)` of the gammatone impulse response.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use super::framing::{frame_count, raw_frames};
use super::{AudioBuffer, FeatureMatrix, FilterbankKind, FilterbankSpec, FrameConfig, Frontend};
use crate::error::{Error, Result};
use crate::math::floored_ln;

/// Glasberg-Moore equivalent rectangular bandwidth in Hz.
pub fn erb(hz: f64) -> f64 {
    24.7 * (4.37 * hz / 1000.0 + 1.0)
}

fn erb_rate(hz: f64) -> f64 {
    21.4 * (4.37 * hz / 1000.0 + 1.0).log10()
}

fn erb_rate_to_hz(rate: f64) -> f64 {
    (10f64.powf(rate / 21.4) - 1.0) * 1000.0 / 4.37
}

/// Center frequencies uniformly spaced on the ERB-rate scale, endpoints included.
pub fn erb_center_frequencies(num_filters: usize, f_min: f64, f_max: f64) -> Vec<f64> {
    if num_filters == 1 {
        return vec![f_min];
    }
    let lo = erb_rate(f_min);
    let hi = erb_rate(f_max);
    (0..num_filters)
        .map(|k| {
            if k == 0 {
                f_min
            } else if k == num_filters - 1 {
                f_max
            } else {
                erb_rate_to_hz(lo + (hi - lo) * k as f64 / (num_filters - 1) as f64)
            }
        })
        .collect()
}

fn filter_channel(signal: &[f64], center: f64, order: usize, sample_rate: f64) -> Vec<f64> {
    let bandwidth = 1.019 * erb(center);
    let a = (-2.0 * PI * bandwidth / sample_rate).exp();
    let gain = 1.0 - a;
    let omega = 2.0 * PI * center / sample_rate;
    let mut state = vec![Complex64::new(0.0, 0.0); order];
    signal
        .iter()
        .enumerate()
        .map(|(n, &x)| {
            let phase = omega * n as f64;
            let (sin, cos) = phase.sin_cos();
            let mut v = Complex64::new(x * cos, -x * sin);
            for s in state.iter_mut() {
                *s = v * gain + *s * a;
                v = *s;
            }
            2.0 * (v.re * cos - v.im * sin)
        })
        .collect()
}

/// Log mean-square output of every channel within every frame.
pub fn gammatone_features(
    audio: &AudioBuffer,
    cfg: &FrameConfig,
    spec: &FilterbankSpec,
) -> Result<FeatureMatrix> {
    let order = match spec.kind {
        FilterbankKind::GammatoneErb { order } if order >= 1 => order,
        other => {
            return Err(Error::InvalidConfig(format!(
                "gammatone features need kind gammatone_erb with order >= 1, got {other:?}"
            )))
        }
    };
    let sr = audio.sample_rate();
    cfg.validate(sr)?;
    let (f_min, f_max) = spec.band(sr)?;
    let frame_len = cfg.frame_len(sr);
    let hop = cfg.hop_len(sr);
    let mut padded = audio.samples().to_vec();
    padded.resize(padded.len().max(frame_len), 0.0);
    let num_frames = frame_count(padded.len(), frame_len, hop);

    let centers = erb_center_frequencies(spec.num_filters, f_min, f_max);
    let mut rows = vec![vec![0.0; centers.len()]; num_frames];
    for (c, &fc) in centers.iter().enumerate() {
        let out = filter_channel(&padded, fc, order, sr as f64);
        for (t, frame) in raw_frames(&out, frame_len, hop).iter().enumerate() {
            let energy = frame.iter().map(|y| y * y).sum::<f64>() / frame_len as f64;
            rows[t][c] = floored_ln(energy);
        }
    }
    FeatureMatrix::from_rows(rows, Frontend::Gamma, *cfg, sr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::LOG_FLOOR;

    #[test]
    fn erb_at_one_khz() {
        assert!((erb(1000.0) - 132.639).abs() < 1e-9);
    }

    #[test]
    fn centers_increase_within_band() {
        let c = erb_center_frequencies(80, 20.0, 8000.0);
        assert_eq!(c.len(), 80);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert!(c.iter().all(|&f| (20.0..=8000.0).contains(&f)));
        // uniform on the ERB-rate axis
        let rates: Vec<f64> = c.iter().map(|&f| erb_rate(f)).collect();
        let d0 = rates[1] - rates[0];
        for w in rates.windows(2) {
            assert!((w[1] - w[0] - d0).abs() < 1e-9);
        }
    }

    #[test]
    fn silence_gives_floor_rows() {
        let audio = AudioBuffer::new(vec![0.0; 4000], 16000).unwrap();
        let f = gammatone_features(
            &audio,
            &FrameConfig::default(),
            &FilterbankSpec::gammatone_default(),
        )
        .unwrap();
        assert_eq!(f.dim(), 80);
        assert!(f.data().iter().all(|&v| v == LOG_FLOOR.ln()));
    }

    #[test]
    fn tone_excites_nearest_channel() {
        let sr = 16000.0;
        let spec = FilterbankSpec {
            num_filters: 32,
            ..FilterbankSpec::gammatone_default()
        };
        let centers = erb_center_frequencies(32, 20.0, 8000.0);
        let target = 12;
        let samples: Vec<f64> = (0..8000)
            .map(|n| (2.0 * PI * centers[target] * n as f64 / sr).sin())
            .collect();
        let audio = AudioBuffer::new(samples, 16000).unwrap();
        let f = gammatone_features(&audio, &FrameConfig::default(), &spec).unwrap();
        let last = f.row(f.num_frames() - 1);
        assert_eq!(crate::math::argmax(last), Some(target));
        // unity gain at the center: mean square of a unit sine is 1/2
        assert!((last[target] - 0.5f64.ln()).abs() < 0.05);
    }
}
