//! Modified group delay features.
//!
//! For a frame `x(n)` with `X = DFT(x)` and `Y = DFT(n x(n))`, the group delay
//! is `(X_R Y_R + X_I Y_I) / |X|^2`. The modified version replaces `|X|` by a
//! cepstrally smoothed magnitude `S` raised to `2 gamma`, and compresses the
//! dynamic range with `sign(tau) |tau|^alpha`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::framing::{fft_size, frame_signal, spectra};
use super::mel::{apply_matrix, dct_matrix};
use super::{AudioBuffer, FeatureMatrix, FrameConfig, Frontend};
use crate::error::{Error, Result};
use crate::math::LOG_FLOOR;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModgdParams {
    pub gamma: f64,
    pub alpha: f64,
    pub lifter_len: usize,
    /// DCT coefficients kept per frame; `None` keeps every frequency bin.
    pub num_coeffs: Option<usize>,
}

impl Default for ModgdParams {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            alpha: 0.4,
            lifter_len: 8,
            num_coeffs: Some(80),
        }
    }
}

impl ModgdParams {
    fn validate(&self, num_bins: usize) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma {} not in (0, 1]",
                self.gamma
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha {} not in (0, 1]",
                self.alpha
            )));
        }
        if self.lifter_len == 0 {
            return Err(Error::InvalidConfig("lifter_len must be >= 1".into()));
        }
        if let Some(n) = self.num_coeffs {
            if n == 0 || n > num_bins {
                return Err(Error::InvalidConfig(format!(
                    "num_coeffs {n} must lie in 1..={num_bins}"
                )));
            }
        }
        Ok(())
    }
}

fn spectra_pair(frame: &[f64], n_fft: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let ramp: Vec<f64> = frame
        .iter()
        .enumerate()
        .map(|(n, x)| n as f64 * x)
        .collect();
    let mut both = spectra(&[frame.to_vec(), ramp], n_fft);
    let y = both.pop().unwrap();
    let x = both.pop().unwrap();
    (x, y)
}

/// Unmodified group delay, in samples, at the one-sided bins of an `n_fft` DFT.
pub fn raw_group_delay(frame: &[f64], n_fft: usize) -> Vec<f64> {
    let (x, y) = spectra_pair(frame, n_fft);
    x.iter()
        .zip(&y)
        .map(|(x, y)| (x.re * y.re + x.im * y.im) / x.norm_sqr().max(LOG_FLOOR))
        .collect()
}

/// Magnitude spectrum smoothed by keeping the low-quefrency part of the
/// real cepstrum.
fn cepstral_smooth(spectrum: &[Complex64], n_fft: usize, lifter_len: usize) -> Vec<f64> {
    let mut planner = FftPlanner::new();
    let inverse = planner.plan_fft_inverse(n_fft);
    let forward = planner.plan_fft_forward(n_fft);
    let half = spectrum.len();
    let mut buf: Vec<Complex64> = (0..n_fft)
        .map(|k| {
            let bin = if k < half { k } else { n_fft - k };
            Complex64::new(spectrum[bin].norm().max(LOG_FLOOR).ln(), 0.0)
        })
        .collect();
    inverse.process(&mut buf);
    let keep = lifter_len.min(n_fft / 2 + 1);
    for (q, c) in buf.iter_mut().enumerate() {
        let quefrency = q.min(n_fft - q);
        if quefrency >= keep {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c = Complex64::new(c.re / n_fft as f64, 0.0);
        }
    }
    forward.process(&mut buf);
    buf[..half].iter().map(|c| c.re.exp()).collect()
}

fn modgd_row(frame: &[f64], n_fft: usize, params: &ModgdParams) -> Vec<f64> {
    let num_bins = n_fft / 2 + 1;
    if frame.iter().all(|&x| x == 0.0) {
        return vec![0.0; num_bins];
    }
    let (x, y) = spectra_pair(frame, n_fft);
    let smooth = cepstral_smooth(&x, n_fft, params.lifter_len);
    x.iter()
        .zip(&y)
        .zip(&smooth)
        .map(|((x, y), s)| {
            let tau = (x.re * y.re + x.im * y.im) / s.powf(2.0 * params.gamma);
            tau.signum() * tau.abs().powf(params.alpha)
        })
        .collect()
}

pub fn modgd_features(
    audio: &AudioBuffer,
    cfg: &FrameConfig,
    params: &ModgdParams,
) -> Result<FeatureMatrix> {
    let frames = frame_signal(audio, cfg)?;
    let n_fft = fft_size(frames.frame_len);
    let num_bins = n_fft / 2 + 1;
    params.validate(num_bins)?;
    let dct = params.num_coeffs.map(|n| dct_matrix(n, num_bins));
    let rows = frames
        .frames
        .iter()
        .map(|f| {
            let row = modgd_row(f, n_fft, params);
            match &dct {
                Some(m) => apply_matrix(m, &row),
                None => row,
            }
        })
        .collect();
    FeatureMatrix::from_rows(rows, Frontend::Modgd, *cfg, audio.sample_rate())
}
