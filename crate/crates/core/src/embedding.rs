use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EmbeddingError {
    #[error("embedding has no components")]
    Empty,
    #[error("embedding has zero norm")]
    ZeroNorm,
    #[error("embedding contains a non-finite component at {0}")]
    NonFinite(usize),
}

/// A dense embedding with a strictly positive Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEmbedding", into = "RawEmbedding")]
pub struct EmbeddingVector {
    values: Vec<f64>,
    provider_tag: String,
}

#[derive(Serialize, Deserialize)]
struct RawEmbedding {
    values: Vec<f64>,
    provider_tag: String,
}

impl TryFrom<RawEmbedding> for EmbeddingVector {
    type Error = EmbeddingError;
    fn try_from(raw: RawEmbedding) -> Result<Self, Self::Error> {
        EmbeddingVector::new(raw.values, raw.provider_tag)
    }
}

impl From<EmbeddingVector> for RawEmbedding {
    fn from(v: EmbeddingVector) -> Self {
        RawEmbedding {
            values: v.values,
            provider_tag: v.provider_tag,
        }
    }
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, provider_tag: impl Into<String>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(i));
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(EmbeddingError::ZeroNorm);
        }
        Ok(Self {
            values,
            provider_tag: provider_tag.into(),
        })
    }

    /// Untagged vector, mostly useful for tests and ad-hoc queries.
    pub fn from_values(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        Self::new(values, "")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn provider_tag(&self) -> &str {
        &self.provider_tag
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Returns a copy scaled by `factor`; errors if the result collapses to zero.
    pub fn scaled(&self, factor: f64) -> Result<Self, EmbeddingError> {
        Self::new(
            self.values.iter().map(|v| v * factor).collect(),
            self.provider_tag.clone(),
        )
    }
}
