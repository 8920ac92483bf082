use std::io::{Cursor, Read};
use std::path::Path;

use hound::{SampleFormat, WavReader};

use crate::error::{Error, Result};

/// Mono audio at a fixed sample rate.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidAudio("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidAudio("audio has no samples".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidAudio(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Reads a mono PCM16 or float32 WAV file.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_wav_bytes(&bytes)
}

/// Decodes an in-memory WAV image. Stereo and unsupported sample formats
/// are rejected.
pub fn read_wav_bytes(bytes: &[u8]) -> Result<AudioBuffer> {
    let reader = WavReader::new(Cursor::new(bytes))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::InvalidAudio(format!(
            "expected mono audio, found {} channels",
            spec.channels
        )));
    }
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => collect(reader, |s: i16| s as f64 / 32768.0)?,
        (SampleFormat::Float, 32) => collect(reader, |s: f32| s as f64)?,
        (fmt, bits) => {
            return Err(Error::InvalidAudio(format!(
                "unsupported sample format {fmt:?} with {bits} bits"
            )))
        }
    };
    AudioBuffer::new(samples, spec.sample_rate)
}

fn collect<R: Read, S: hound::Sample>(
    mut reader: WavReader<R>,
    convert: impl Fn(S) -> f64,
) -> Result<Vec<f64>> {
    // The declared length is untrusted; let the vector grow with what is actually there.
    let mut out = Vec::new();
    for s in reader.samples::<S>() {
        out.push(convert(s?));
    }
    Ok(out)
}
