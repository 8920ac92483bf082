//! TOYM1: JSON container for a toy encoder/decoder pair and its vocabulary.
//!
//! ```json
//! {"format": "TOYM1", "vocab": [...], "blank_id": 0, "sos_id": 1, "eos_id": 1,
//!  "subsample_factor": 4,
//!  "matrices": {"encoder": {"shape": [D, N], "data": [...]}, "encoder_bias": ...,
//!               "embedding": ..., "context": ..., "output": ..., "bias": ...}}
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::attention::{BoundAttention, ToyAttentionDecoder};
use super::encoder::{toy_encode, CtcPosteriorGrid, EncodedUtterance, ToyEncoder};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::frontend::FeatureMatrix;
use crate::tensor::{ParameterSet, Tensor};

pub const TOYM1_FORMAT: &str = "TOYM1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToyModelFile {
    format: String,
    vocab: Vec<String>,
    blank_id: usize,
    sos_id: usize,
    eos_id: usize,
    #[serde(default = "default_subsample")]
    subsample_factor: usize,
    matrices: ParameterSet,
}

fn default_subsample() -> usize {
    4
}

/// A loadable toy acoustic model.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyModel {
    pub vocab: Vocabulary,
    pub encoder: ToyEncoder,
    pub decoder: ToyAttentionDecoder,
}

fn take(m: &mut ParameterSet, name: &str) -> Result<Tensor> {
    let t = m
        .remove(name)
        .ok_or_else(|| Error::malformed("TOYM1", format!("missing matrix {name:?}")))?;
    t.validate(name)
        .map_err(|e| Error::malformed("TOYM1", e.to_string()))?;
    Ok(t)
}

fn expect_shape(name: &str, t: &Tensor, shape: &[usize]) -> Result<()> {
    if t.shape != shape {
        return Err(Error::malformed(
            "TOYM1",
            format!("{name} has shape {:?}, expected {shape:?}", t.shape),
        ));
    }
    Ok(())
}

impl ToyModel {
    /// Validates every shape against the vocabulary.
    pub fn from_parts(
        vocab: Vocabulary,
        params: ParameterSet,
        subsample_factor: usize,
    ) -> Result<Self> {
        if subsample_factor == 0 {
            return Err(Error::malformed("TOYM1", "subsample_factor must be >= 1"));
        }
        let mut m = params;
        let n = vocab.len();
        let encoder = take(&mut m, "encoder")?;
        if encoder.shape.len() != 2 || encoder.shape[0] == 0 {
            return Err(Error::malformed("TOYM1", "encoder must be a D x N matrix"));
        }
        expect_shape("encoder", &encoder, &[encoder.shape[0], n])?;
        let encoder_bias = match m.remove("encoder_bias") {
            Some(t) => {
                t.validate("encoder_bias")
                    .map_err(|e| Error::malformed("TOYM1", e.to_string()))?;
                expect_shape("encoder_bias", &t, &[n])?;
                t.data
            }
            None => vec![0.0; n],
        };
        let embedding = take(&mut m, "embedding")?;
        if embedding.shape.len() != 2 || embedding.shape[1] == 0 {
            return Err(Error::malformed(
                "TOYM1",
                "embedding must be an N x E matrix",
            ));
        }
        let e = embedding.shape[1];
        expect_shape("embedding", &embedding, &[n, e])?;
        let context = take(&mut m, "context")?;
        expect_shape("context", &context, &[n, e])?;
        let output = take(&mut m, "output")?;
        expect_shape("output", &output, &[2 * e, n])?;
        let bias = take(&mut m, "bias")?;
        expect_shape("bias", &bias, &[n])?;
        if let Some(extra) = m.keys().next() {
            return Err(Error::malformed(
                "TOYM1",
                format!("unexpected matrix {extra:?}"),
            ));
        }
        Ok(Self {
            vocab,
            encoder: ToyEncoder {
                weights: encoder,
                bias: encoder_bias,
                subsample_factor,
            },
            decoder: ToyAttentionDecoder {
                embedding,
                context,
                output,
                bias: bias.data,
            },
        })
    }

    /// Seeded model with Gaussian weights of standard deviation `scale`.
    /// Useful as a fixture; it has learned nothing.
    pub fn random(
        vocab: Vocabulary,
        input_dim: usize,
        embed_dim: usize,
        subsample_factor: usize,
        scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || embed_dim == 0 || !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidConfig(
                "random model needs positive dims and a finite scale".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, scale).expect("checked scale");
        let n = vocab.len();
        let mut draw = |rows: usize, cols: usize| {
            Tensor::matrix(
                rows,
                cols,
                (0..rows * cols).map(|_| normal.sample(&mut rng)).collect(),
            )
        };
        let mut p = ParameterSet::new();
        p.insert("encoder".into(), draw(input_dim, n)?);
        p.insert("encoder_bias".into(), Tensor::vector(draw(1, n)?.data));
        p.insert("embedding".into(), draw(n, embed_dim)?);
        p.insert("context".into(), draw(n, embed_dim)?);
        p.insert("output".into(), draw(2 * embed_dim, n)?);
        p.insert("bias".into(), Tensor::vector(draw(1, n)?.data));
        Self::from_parts(vocab, p, subsample_factor)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ToyModelFile =
            serde_json::from_str(text).map_err(|e| Error::malformed("TOYM1", e.to_string()))?;
        if file.format != TOYM1_FORMAT {
            return Err(Error::malformed(
                "TOYM1",
                format!("format tag {:?}", file.format),
            ));
        }
        let vocab = Vocabulary::new(file.vocab, file.blank_id, file.sos_id, file.eos_id)
            .map_err(|e| Error::malformed("TOYM1", e.to_string()))?;
        Self::from_parts(vocab, file.matrices, file.subsample_factor)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn parameters(&self) -> ParameterSet {
        let mut m = ParameterSet::new();
        m.insert("encoder".into(), self.encoder.weights.clone());
        m.insert(
            "encoder_bias".into(),
            Tensor::vector(self.encoder.bias.clone()),
        );
        m.insert("embedding".into(), self.decoder.embedding.clone());
        m.insert("context".into(), self.decoder.context.clone());
        m.insert("output".into(), self.decoder.output.clone());
        m.insert("bias".into(), Tensor::vector(self.decoder.bias.clone()));
        m
    }

    pub fn to_json(&self) -> String {
        let file = ToyModelFile {
            format: TOYM1_FORMAT.into(),
            vocab: self.vocab.tokens().to_vec(),
            blank_id: self.vocab.blank(),
            sos_id: self.vocab.sos(),
            eos_id: self.vocab.eos(),
            subsample_factor: self.encoder.subsample_factor,
            matrices: self.parameters(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn encode(&self, features: &FeatureMatrix) -> Result<(EncodedUtterance, CtcPosteriorGrid)> {
        toy_encode(features, &self.encoder, self.vocab.blank())
    }

    pub fn attention<'a>(&'a self, h: &EncodedUtterance) -> Result<BoundAttention<'a>> {
        self.decoder.bind(h)
    }
}
