use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{AudioBuffer, FrameConfig, Window};
use crate::error::Result;

/// Windowed analysis frames of one utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct Frames {
    pub frames: Vec<Vec<f64>>,
    pub frame_len: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Frames {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Number of frames for `num_samples` once short inputs are padded to one frame.
pub fn frame_count(num_samples: usize, frame_len: usize, hop: usize) -> usize {
    let len = num_samples.max(frame_len);
    1 + (len - frame_len) / hop
}

/// FFT length used for a frame: the next power of two.
pub fn fft_size(frame_len: usize) -> usize {
    frame_len.next_power_of_two()
}

pub fn window_values(window: Window, len: usize) -> Vec<f64> {
    let n = len as f64;
    (0..len)
        .map(|i| {
            let phase = 2.0 * PI * i as f64 / n;
            match window {
                Window::Hann => 0.5 - 0.5 * phase.cos(),
                Window::Hamming => 0.54 - 0.46 * phase.cos(),
                Window::Rectangular => 1.0,
            }
        })
        .collect()
}

/// Splits the signal into unwindowed frames, zero-padding when the input is
/// shorter than one frame.
pub(crate) fn raw_frames(samples: &[f64], frame_len: usize, hop: usize) -> Vec<Vec<f64>> {
    let count = frame_count(samples.len(), frame_len, hop);
    (0..count)
        .map(|t| {
            let start = t * hop;
            let mut frame = vec![0.0; frame_len];
            let end = (start + frame_len).min(samples.len());
            if start < end {
                frame[..end - start].copy_from_slice(&samples[start..end]);
            }
            frame
        })
        .collect()
}

pub fn frame_signal(audio: &AudioBuffer, cfg: &FrameConfig) -> Result<Frames> {
    let sr = audio.sample_rate();
    cfg.validate(sr)?;
    let frame_len = cfg.frame_len(sr);
    let hop = cfg.hop_len(sr);
    let window = window_values(cfg.window, frame_len);
    let frames = raw_frames(audio.samples(), frame_len, hop)
        .into_iter()
        .map(|mut f| {
            f.iter_mut().zip(&window).for_each(|(x, w)| *x *= w);
            f
        })
        .collect();
    Ok(Frames {
        frames,
        frame_len,
        hop,
        sample_rate: sr,
    })
}

/// Non-negative-frequency DFT of every frame, zero-padded to `fft_size`.
pub fn stft(frames: &Frames) -> Vec<Vec<Complex64>> {
    spectra(&frames.frames, fft_size(frames.frame_len))
}

pub(crate) fn spectra(frames: &[Vec<f64>], n: usize) -> Vec<Vec<Complex64>> {
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    frames
        .iter()
        .map(|frame| {
            buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for (b, &x) in buf.iter_mut().zip(frame) {
                b.re = x;
            }
            fft.process(&mut buf);
            buf[..n / 2 + 1].to_vec()
        })
        .collect()
}

pub(crate) fn power_spectra(frames: &Frames) -> Vec<Vec<f64>> {
    stft(frames)
        .into_iter()
        .map(|row| row.into_iter().map(|c| c.norm_sqr()).collect())
        .collect()
}
