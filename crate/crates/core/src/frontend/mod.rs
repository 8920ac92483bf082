//! Audio frontends: framing, the six time-frequency representations,
//! global normalization and spectral masking.

mod audio;
mod cqt;
mod feat_io;
mod framing;
mod gammatone;
mod mel;
mod modgd;
mod normalize;
mod symlet;

pub use audio::{read_wav, read_wav_bytes, AudioBuffer};
pub use cqt::{cqt_center_frequencies, cqt_features, cqt_quality_factor};
pub use feat_io::{decode_feat1, encode_feat1, read_feat1, write_feat1, FEAT1_MAGIC};
pub use framing::{fft_size, frame_count, frame_signal, stft, window_values, Frames};
pub use gammatone::{erb, erb_center_frequencies, gammatone_features};
pub use mel::{
    dct_matrix, hz_to_mel, mel_filterbank, mel_spectrogram, mel_to_hz, mfcc, MelFilterbank,
};
pub use modgd::{modgd_features, raw_group_delay, ModgdParams};
pub use normalize::{
    apply_normalization, fit_global_normalization, remove_normalization, spec_mask, MaskSpec,
    NormalizationStats,
};
pub use symlet::{
    best_basis, symlet_features, symlet_filter, wavelet_packet_energies, PacketNode, SymletParams,
    WaveletFilter,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analysis window applied to each frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
    Hamming,
    Rectangular,
}

/// Framing parameters shared by every frontend so that frame counts line up.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameConfig {
    pub frame_length_ms: f64,
    pub hop_length_ms: f64,
    pub window: Window,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            frame_length_ms: 25.0,
            hop_length_ms: 10.0,
            window: Window::Hann,
        }
    }
}

impl FrameConfig {
    /// Frame length in samples at `sample_rate`.
    pub fn frame_len(&self, sample_rate: u32) -> usize {
        (self.frame_length_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        (self.hop_length_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if !(self.frame_length_ms.is_finite() && self.hop_length_ms.is_finite()) {
            return Err(Error::InvalidConfig(
                "frame/hop lengths must be finite".into(),
            ));
        }
        if self.hop_length_ms <= 0.0 || self.hop_length_ms > self.frame_length_ms {
            return Err(Error::InvalidConfig(format!(
                "hop length {} ms must lie in (0, frame length {} ms]",
                self.hop_length_ms, self.frame_length_ms
            )));
        }
        if self.frame_len(sample_rate) < 2 {
            return Err(Error::InvalidConfig(
                "frame length must cover at least 2 samples".into(),
            ));
        }
        if self.hop_len(sample_rate) == 0 {
            return Err(Error::InvalidConfig(
                "hop must cover at least 1 sample".into(),
            ));
        }
        Ok(())
    }
}

/// The six feature families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Frontend {
    #[serde(alias = "mel")]
    Mel,
    #[serde(alias = "mfcc")]
    Mfcc,
    #[serde(alias = "gamma")]
    Gamma,
    #[serde(alias = "cqt")]
    Cqt,
    #[serde(alias = "modgd")]
    Modgd,
    #[serde(alias = "symlet")]
    Symlet,
}

impl Frontend {
    pub const ALL: [Frontend; 6] = [
        Frontend::Mel,
        Frontend::Mfcc,
        Frontend::Gamma,
        Frontend::Cqt,
        Frontend::Modgd,
        Frontend::Symlet,
    ];

    /// Tag byte used by the FEAT1 container.
    pub fn tag(self) -> u8 {
        match self {
            Frontend::Mel => 0,
            Frontend::Mfcc => 1,
            Frontend::Gamma => 2,
            Frontend::Cqt => 3,
            Frontend::Modgd => 4,
            Frontend::Symlet => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.tag() == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            Frontend::Mel => "MEL",
            Frontend::Mfcc => "MFCC",
            Frontend::Gamma => "GAMMA",
            Frontend::Cqt => "CQT",
            Frontend::Modgd => "MODGD",
            Frontend::Symlet => "SYMLET",
        }
    }
}

impl std::fmt::Display for Frontend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Frontend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown frontend {s:?}")))
    }
}

/// A `T x D` feature matrix, row-major, plus where it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    num_frames: usize,
    dim: usize,
    pub frontend: Frontend,
    pub frame_config: FrameConfig,
    pub sample_rate: u32,
}

impl FeatureMatrix {
    pub fn new(
        data: Vec<f64>,
        num_frames: usize,
        dim: usize,
        frontend: Frontend,
        frame_config: FrameConfig,
        sample_rate: u32,
    ) -> Result<Self> {
        if num_frames == 0 || dim == 0 {
            return Err(Error::DimensionMismatch(format!(
                "feature matrix must be non-empty, got {num_frames} x {dim}"
            )));
        }
        if num_frames.checked_mul(dim) != Some(data.len()) {
            return Err(Error::DimensionMismatch(format!(
                "{} values cannot fill a {num_frames} x {dim} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidAudio(
                "feature matrix contains non-finite values".into(),
            ));
        }
        Ok(Self {
            data,
            num_frames,
            dim,
            frontend,
            frame_config,
            sample_rate,
        })
    }

    pub(crate) fn from_rows(
        rows: Vec<Vec<f64>>,
        frontend: Frontend,
        frame_config: FrameConfig,
        sample_rate: u32,
    ) -> Result<Self> {
        let num_frames = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch("ragged feature rows".into()));
        }
        let data = rows.into_iter().flatten().collect();
        Self::new(data, num_frames, dim, frontend, frame_config, sample_rate)
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn get(&self, t: usize, d: usize) -> f64 {
        self.data[t * self.dim + d]
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Shape of a filterbank.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterbankKind {
    MelTriangular,
    GammatoneErb { order: usize },
    CqtLog { bins_per_octave: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterbankSpec {
    #[serde(flatten)]
    pub kind: FilterbankKind,
    pub num_filters: usize,
    pub f_min: f64,
    /// `None` means the Nyquist frequency of the audio.
    pub f_max: Option<f64>,
}

impl FilterbankSpec {
    pub fn mel_default() -> Self {
        Self {
            kind: FilterbankKind::MelTriangular,
            num_filters: 80,
            f_min: 20.0,
            f_max: None,
        }
    }

    pub fn gammatone_default() -> Self {
        Self {
            kind: FilterbankKind::GammatoneErb { order: 4 },
            num_filters: 80,
            f_min: 20.0,
            f_max: None,
        }
    }

    /// 24 bins per octave from C1 (32.7 Hz) over 7 octaves.
    pub fn cqt_default() -> Self {
        Self {
            kind: FilterbankKind::CqtLog {
                bins_per_octave: 24,
            },
            num_filters: 168,
            f_min: 32.7,
            f_max: None,
        }
    }

    /// Resolves `f_max` and checks the band against the sample rate.
    pub fn band(&self, sample_rate: u32) -> Result<(f64, f64)> {
        let nyquist = sample_rate as f64 / 2.0;
        let f_max = self.f_max.unwrap_or(nyquist);
        if self.num_filters == 0 {
            return Err(Error::InvalidConfig("num_filters must be >= 1".into()));
        }
        if !(self.f_min.is_finite() && f_max.is_finite()) || self.f_min < 0.0 || self.f_min >= f_max
        {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= f_min < f_max, got {} and {}",
                self.f_min, f_max
            )));
        }
        if f_max > nyquist {
            return Err(Error::InvalidConfig(format!(
                "f_max {f_max} Hz exceeds Nyquist {nyquist} Hz"
            )));
        }
        Ok((self.f_min, f_max))
    }
}

/// Everything needed to run any one frontend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrontendParams {
    pub frame: FrameConfig,
    pub mel: FilterbankSpec,
    pub num_ceps: usize,
    pub gammatone: FilterbankSpec,
    pub cqt: FilterbankSpec,
    pub modgd: ModgdParams,
    pub symlet: SymletParams,
}

impl Default for FrontendParams {
    fn default() -> Self {
        Self {
            frame: FrameConfig::default(),
            mel: FilterbankSpec::mel_default(),
            num_ceps: 13,
            gammatone: FilterbankSpec::gammatone_default(),
            cqt: FilterbankSpec::cqt_default(),
            modgd: ModgdParams::default(),
            symlet: SymletParams::default(),
        }
    }
}

/// Runs `frontend` on `audio` with `params`.
pub fn extract(
    frontend: Frontend,
    audio: &AudioBuffer,
    params: &FrontendParams,
) -> Result<FeatureMatrix> {
    let cfg = &params.frame;
    match frontend {
        Frontend::Mel => mel_spectrogram(audio, cfg, &params.mel),
        Frontend::Mfcc => mfcc(audio, cfg, &params.mel, params.num_ceps),
        Frontend::Gamma => gammatone_features(audio, cfg, &params.gammatone),
        Frontend::Cqt => cqt_features(audio, cfg, &params.cqt),
        Frontend::Modgd => modgd_features(audio, cfg, &params.modgd),
        Frontend::Symlet => symlet_features(audio, cfg, &params.symlet).map(|(f, _)| f),
    }
}
