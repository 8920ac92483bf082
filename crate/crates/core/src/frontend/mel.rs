use super::framing::{fft_size, frame_signal, power_spectra};
use super::{AudioBuffer, FeatureMatrix, FilterbankKind, FilterbankSpec, FrameConfig, Frontend};
use crate::error::{Error, Result};
use crate::math::floored_ln;

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters over the one-sided FFT bins.
#[derive(Clone, Debug, PartialEq)]
pub struct MelFilterbank {
    /// `num_filters x (n_fft/2 + 1)` weights.
    pub weights: Vec<Vec<f64>>,
    pub center_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(power).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Builds triangles that are symmetric on the mel axis, evenly spaced
/// between `f_min` and `f_max`.
pub fn mel_filterbank(
    spec: &FilterbankSpec,
    sample_rate: u32,
    n_fft: usize,
) -> Result<MelFilterbank> {
    if spec.kind != FilterbankKind::MelTriangular {
        return Err(Error::InvalidConfig(format!(
            "mel filterbank needs kind mel_triangular, got {:?}",
            spec.kind
        )));
    }
    let (f_min, f_max) = spec.band(sample_rate)?;
    let num_bins = n_fft / 2 + 1;
    let mel_lo = hz_to_mel(f_min);
    let mel_hi = hz_to_mel(f_max);
    let step = (mel_hi - mel_lo) / (spec.num_filters + 1) as f64;
    let bin_mels: Vec<f64> = (0..num_bins)
        .map(|k| hz_to_mel(k as f64 * sample_rate as f64 / n_fft as f64))
        .collect();

    let mut weights = Vec::with_capacity(spec.num_filters);
    let mut center_hz = Vec::with_capacity(spec.num_filters);
    for m in 0..spec.num_filters {
        let left = mel_lo + step * m as f64;
        let center = left + step;
        let right = center + step;
        let mut row: Vec<f64> = bin_mels
            .iter()
            .map(|&b| {
                if b > left && b < right {
                    if b <= center {
                        (b - left) / (center - left)
                    } else {
                        (right - b) / (right - center)
                    }
                } else {
                    0.0
                }
            })
            .collect();
        // Narrow filters can fall between bins; give them the nearest bin.
        if row.iter().all(|&w| w == 0.0) {
            let nearest = nearest_bin(&bin_mels, center);
            row[nearest] = 1.0;
        }
        weights.push(row);
        center_hz.push(mel_to_hz(center));
    }
    Ok(MelFilterbank { weights, center_hz })
}

fn nearest_bin(bin_mels: &[f64], target: f64) -> usize {
    let mut best = 0;
    for (i, &m) in bin_mels.iter().enumerate() {
        if (m - target).abs() < (bin_mels[best] - target).abs() {
            best = i;
        }
    }
    best
}

/// Log mel filterbank energies.
pub fn mel_spectrogram(
    audio: &AudioBuffer,
    cfg: &FrameConfig,
    spec: &FilterbankSpec,
) -> Result<FeatureMatrix> {
    let frames = frame_signal(audio, cfg)?;
    let fb = mel_filterbank(spec, audio.sample_rate(), fft_size(frames.frame_len))?;
    let rows = power_spectra(&frames)
        .iter()
        .map(|p| fb.apply(p).into_iter().map(floored_ln).collect())
        .collect();
    FeatureMatrix::from_rows(rows, Frontend::Mel, *cfg, audio.sample_rate())
}

/// Orthonormal DCT-II, keeping the first `n_out` of `n_in` coefficients.
pub fn dct_matrix(n_out: usize, n_in: usize) -> Vec<Vec<f64>> {
    let n = n_in as f64;
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            (0..n_in)
                .map(|i| scale * (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n).cos())
                .collect()
        })
        .collect()
}

pub(crate) fn apply_matrix(matrix: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    matrix
        .iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn mfcc(
    audio: &AudioBuffer,
    cfg: &FrameConfig,
    spec: &FilterbankSpec,
    num_ceps: usize,
) -> Result<FeatureMatrix> {
    if num_ceps == 0 || num_ceps > spec.num_filters {
        return Err(Error::InvalidConfig(format!(
            "num_ceps {num_ceps} must lie in 1..={}",
            spec.num_filters
        )));
    }
    let logmel = mel_spectrogram(audio, cfg, spec)?;
    let dct = dct_matrix(num_ceps, spec.num_filters);
    let rows = logmel.rows().map(|r| apply_matrix(&dct, r)).collect();
    FeatureMatrix::from_rows(rows, Frontend::Mfcc, *cfg, audio.sample_rate())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_reference_points() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        let expected = 2595.0 * 2f64.log10();
        assert!((hz_to_mel(700.0) - expected).abs() < 1e-12);
        for hz in [20.0, 440.0, 7999.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-9);
        }
    }

    #[test]
    fn triangles_are_positive_and_peak_at_center() {
        let spec = FilterbankSpec::mel_default();
        let n_fft = 512;
        let fb = mel_filterbank(&spec, 16000, n_fft).unwrap();
        assert_eq!(fb.weights.len(), 80);
        let bin_mels: Vec<f64> = (0..=n_fft / 2)
            .map(|k| hz_to_mel(k as f64 * 16000.0 / n_fft as f64))
            .collect();
        for (row, &c) in fb.weights.iter().zip(&fb.center_hz) {
            let sum: f64 = row.iter().sum();
            assert!(sum > 0.0 && sum.is_finite());
            let peak = crate::math::argmax(row).unwrap();
            assert_eq!(peak, nearest_bin(&bin_mels, hz_to_mel(c)));
        }
        assert!(fb.center_hz.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_band_above_nyquist() {
        let mut spec = FilterbankSpec::mel_default();
        spec.f_max = Some(9000.0);
        assert!(mel_filterbank(&spec, 16000, 512).is_err());
    }

    #[test]
    fn dct_is_orthonormal() {
        let n = 80;
        let c = dct_matrix(n, n);
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = c[i].iter().zip(&c[j]).map(|(a, b)| a * b).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-12, "({i},{j}) = {dot}");
            }
        }
    }

    #[test]
    fn dct_of_constant_has_only_dc() {
        let c = dct_matrix(13, 40);
        let out = apply_matrix(&c, &[3.5; 40]);
        assert!((out[0] - 3.5 * 40f64.sqrt()).abs() < 1e-12);
        assert!(out[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn inverse_dct_round_trip() {
        let n = 24;
        let c = dct_matrix(n, n);
        let v: Vec<f64> = (0..n).map(|i| ((i * 7) % 5) as f64 - 1.3).collect();
        let coeffs = apply_matrix(&c, &v);
        let back: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|k| c[k][i] * coeffs[k]).sum())
            .collect();
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn mfcc_rejects_too_many_ceps() {
        let audio = AudioBuffer::new(vec![0.0; 1600], 16000).unwrap();
        let spec = FilterbankSpec::mel_default();
        assert!(mfcc(&audio, &FrameConfig::default(), &spec, 81).is_err());
        let f = mfcc(&audio, &FrameConfig::default(), &spec, 13).unwrap();
        assert_eq!(f.dim(), 13);
    }
}
