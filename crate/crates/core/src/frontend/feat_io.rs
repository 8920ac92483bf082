//! FEAT1: a little-endian binary container for one feature matrix.
//!
//! ```text
//! "FEAT1" | tag u8 | sample_rate u32 | frame_ms f64 | hop_ms f64 | T u64 | D u64 | T*D f64
//! ```

use std::path::Path;

use super::{FeatureMatrix, FrameConfig, Frontend, Window};
use crate::error::{Error, Result};

pub const FEAT1_MAGIC: &[u8; 5] = b"FEAT1";
const HEADER_LEN: usize = 5 + 1 + 4 + 8 + 8 + 8 + 8;

pub fn encode_feat1(f: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + f.data().len() * 8);
    out.extend_from_slice(FEAT1_MAGIC);
    out.push(f.frontend.tag());
    out.extend_from_slice(&f.sample_rate.to_le_bytes());
    out.extend_from_slice(&f.frame_config.frame_length_ms.to_le_bytes());
    out.extend_from_slice(&f.frame_config.hop_length_ms.to_le_bytes());
    out.extend_from_slice(&(f.num_frames() as u64).to_le_bytes());
    out.extend_from_slice(&(f.dim() as u64).to_le_bytes());
    for v in f.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::malformed("FEAT1", "truncated"));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

/// Parses a FEAT1 image. The window is not stored, so the returned frame
/// config carries the default Hann window.
pub fn decode_feat1(bytes: &[u8]) -> Result<FeatureMatrix> {
    let mut r = Reader { bytes };
    if r.take(5)? != FEAT1_MAGIC {
        return Err(Error::malformed("FEAT1", "bad magic"));
    }
    let tag = r.array::<1>()?[0];
    let frontend = Frontend::from_tag(tag)
        .ok_or_else(|| Error::malformed("FEAT1", format!("unknown frontend tag {tag}")))?;
    let sample_rate = u32::from_le_bytes(r.array()?);
    let frame_length_ms = f64::from_le_bytes(r.array()?);
    let hop_length_ms = f64::from_le_bytes(r.array()?);
    let frames = u64::from_le_bytes(r.array()?);
    let dim = u64::from_le_bytes(r.array()?);
    let count = frames
        .checked_mul(dim)
        .and_then(|n| usize::try_from(n).ok())
        .filter(|n| n.checked_mul(8) == Some(r.bytes.len()))
        .ok_or_else(|| {
            Error::malformed(
                "FEAT1",
                format!(
                    "{frames} x {dim} values do not match {} payload bytes",
                    r.bytes.len()
                ),
            )
        })?;
    if sample_rate == 0 {
        return Err(Error::malformed("FEAT1", "zero sample rate"));
    }
    let frame_config = FrameConfig {
        frame_length_ms,
        hop_length_ms,
        window: Window::Hann,
    };
    if !(frame_length_ms.is_finite() && hop_length_ms > 0.0 && hop_length_ms <= frame_length_ms) {
        return Err(Error::malformed("FEAT1", "invalid frame/hop lengths"));
    }
    let data: Vec<f64> = r
        .bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    debug_assert_eq!(data.len(), count);
    FeatureMatrix::new(
        data,
        frames as usize,
        dim as usize,
        frontend,
        frame_config,
        sample_rate,
    )
    .map_err(|e| Error::malformed("FEAT1", e.to_string()))
}

pub fn write_feat1(path: impl AsRef<Path>, f: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_feat1(f)).map_err(|e| Error::io(path, e))
}

pub fn read_feat1(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feat1(&bytes)
}
