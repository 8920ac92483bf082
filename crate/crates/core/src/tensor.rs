use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dense real tensor, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let t = Self { shape, data };
        t.validate("tensor")?;
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let expected = self
            .shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d));
        if expected != Some(self.data.len()) {
            return Err(Error::DimensionMismatch(format!(
                "{name}: shape {:?} does not hold {} values",
                self.shape,
                self.data.len()
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("{name}: non-finite value")));
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    /// `v^T * self` for a matrix of shape `[v.len(), cols]`.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let cols = self.cols();
        let mut out = vec![0.0; cols];
        for (r, &x) in v.iter().enumerate() {
            if x != 0.0 {
                for (o, w) in out.iter_mut().zip(self.row(r)) {
                    *o += x * w;
                }
            }
        }
        out
    }
}

/// Named tensors, e.g. one checkpoint of a model.
pub type ParameterSet = BTreeMap<String, Tensor>;
