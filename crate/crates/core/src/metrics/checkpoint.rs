use crate::error::{Error, Result};
use crate::tensor::{ParameterSet, Tensor};

/// Elementwise mean of parameter sets with identical names and shapes.
pub fn average_checkpoints(sets: &[ParameterSet]) -> Result<ParameterSet> {
    let first = sets
        .first()
        .ok_or_else(|| Error::Empty("no checkpoints to average".into()))?;
    for (k, set) in sets.iter().enumerate() {
        if set.len() != first.len() || set.keys().ne(first.keys()) {
            return Err(Error::DimensionMismatch(format!(
                "checkpoint {k} has different parameter names"
            )));
        }
        for (name, t) in set {
            t.validate(name)?;
            if t.shape != first[name].shape {
                return Err(Error::DimensionMismatch(format!(
                    "checkpoint {k}: {name} has shape {:?}, expected {:?}",
                    t.shape, first[name].shape
                )));
            }
        }
    }
    let count = sets.len() as f64;
    Ok(first
        .iter()
        .map(|(name, t)| {
            let mut sum = vec![0.0; t.data.len()];
            for set in sets {
                for (s, v) in sum.iter_mut().zip(&set[name].data) {
                    *s += v;
                }
            }
            let data = sum.into_iter().map(|s| s / count).collect();
            (
                name.clone(),
                Tensor {
                    shape: t.shape.clone(),
                    data,
                },
            )
        })
        .collect())
}
