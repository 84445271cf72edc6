//! Speaker embeddings with their time extents and optional word payloads.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the Euclidean norm of a loaded vector before it is rescaled.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// One embedding together with the span of audio it was extracted from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub index: usize,
    pub vector: Vec<f64>,
    pub start_time: f64,
    pub end_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub words: Option<Vec<String>>,
}

impl EmbeddingRecord {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start_time + self.end_time)
    }

    pub fn duration(&self) -> f64 {
        self.end_time - self.start_time
    }
}

/// An ordered session of `N` embeddings sharing one dimension `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    records: Vec<EmbeddingRecord>,
    dim: usize,
}

impl EmbeddingSet {
    /// Validates the records and rescales any vector whose norm is off by
    /// more than [`UNIT_NORM_TOL`].
    pub fn new(mut records: Vec<EmbeddingRecord>) -> Result<Self> {
        let dim = records.first().map_or(0, |r| r.vector.len());
        let mut max_dev = 0.0f64;
        for (k, rec) in records.iter_mut().enumerate() {
            if rec.vector.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "embedding {k} has dimension {} (expected {dim})",
                    rec.vector.len()
                )));
            }
            if rec.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("embedding {k} has non-finite entries")));
            }
            if !(rec.start_time < rec.end_time) {
                return Err(Error::InvalidArgument(format!(
                    "embedding {k} has start_time {} >= end_time {}",
                    rec.start_time, rec.end_time
                )));
            }
            rec.index = k;
            let norm = norm(&rec.vector);
            if norm == 0.0 {
                return Err(Error::ZeroNorm(k));
            }
            let dev = (norm - 1.0).abs();
            max_dev = max_dev.max(dev);
            if dev > UNIT_NORM_TOL {
                rec.vector.iter_mut().for_each(|v| *v /= norm);
            }
        }
        if max_dev > 1e-3 {
            warn!("rescaled embeddings to unit norm (max norm deviation {max_dev:.3e})");
        }
        Ok(Self { records, dim })
    }

    /// Builds a set from bare vectors laid out on a contiguous timeline of
    /// `window`-second spans.
    pub fn from_vectors(vectors: Vec<Vec<f64>>, window: f64) -> Result<Self> {
        let records = vectors
            .into_iter()
            .enumerate()
            .map(|(k, vector)| EmbeddingRecord {
                index: k,
                vector,
                start_time: k as f64 * window,
                end_time: (k + 1) as f64 * window,
                words: None,
            })
            .collect();
        Self::new(records)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn get(&self, index: usize) -> Option<&EmbeddingRecord> {
        self.records.get(index)
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().map(|r| r.vector.as_slice())
    }

    /// Replaces every vector while keeping timing and words.
    pub fn with_vectors(&self, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.len() != self.records.len() {
            return Err(Error::LengthMismatch { pred: vectors.len(), truth: self.records.len() });
        }
        let records =
            self.records.iter().zip(vectors).map(|(r, vector)| EmbeddingRecord { vector, ..r.clone() }).collect();
        Self::new(records)
    }

    /// The embeddings as an `N x D` matrix, one row per embedding.
    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.len(), self.dim, |i, j| self.records[i].vector[j])
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
