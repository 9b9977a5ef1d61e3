//! Feature extraction and dissimilarity scoring.
//!
//! Scores are Euclidean distances between unit-norm embeddings: lower means
//! more similar, and a probe is accepted iff its score is at most the
//! threshold.

mod remote;
mod toy;

pub use remote::{embed_remote, RemoteEmbedder, ServiceInfo};
pub use toy::{embed_toy, ToyEmbedder, GRID};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morph::LandmarkSet;
use crate::raster::Image;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("embedding service unreachable: {0}")]
    Transport(String),
    #[error("malformed service response: {0}")]
    MalformedResponse(String),
    #[error("service advertised dimension {advertised} but returned {got}")]
    AdvertisedDimMismatch { advertised: usize, got: usize },
    #[error("service error {status} ({code}): {message}")]
    Service {
        status: u16,
        code: String,
        message: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    Toy,
    Remote,
}

/// Unit-norm feature vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    values: Vec<f64>,
    source: EmbeddingSource,
}

impl Embedding {
    /// Normalizes `values` to unit length; `None` for an empty, zero or
    /// non-finite vector.
    pub fn normalized(values: Vec<f64>, source: EmbeddingSource) -> Option<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if values.is_empty() || !norm.is_finite() || norm == 0.0 {
            return None;
        }
        Some(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
            source,
        })
    }

    /// The unit basis vector `e_index` of dimension `dim`.
    pub fn basis(dim: usize, index: usize, source: EmbeddingSource) -> Self {
        let mut values = vec![0.0; dim];
        values[index] = 1.0;
        Self { values, source }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn source(&self) -> EmbeddingSource {
        self.source
    }

    /// Stable byte encoding (big-endian f64s), used for digests.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_be_bytes()).collect()
    }
}

pub fn distance(a: &Embedding, b: &Embedding) -> Result<f64, MatchError> {
    if a.dim() != b.dim() {
        return Err(MatchError::DimMismatch(a.dim(), b.dim()));
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchDecision {
    pub score: f64,
    pub threshold: f64,
    pub accepted: bool,
}

impl MatchDecision {
    /// Inclusive boundary: a score equal to the threshold is accepted.
    pub fn from_score(score: f64, threshold: f64) -> Self {
        Self {
            score,
            threshold,
            accepted: score <= threshold,
        }
    }
}

pub fn match_embeddings(
    probe: &Embedding,
    reference: &Embedding,
    threshold: f64,
) -> Result<MatchDecision, MatchError> {
    Ok(MatchDecision::from_score(distance(probe, reference)?, threshold))
}

/// Anything that turns a face image into an embedding.
pub trait Embedder: Send + Sync {
    fn embed(&self, img: &Image) -> Result<Embedding, MatchError>;

    fn dim(&self) -> usize;

    /// Landmark detection, for embedders backed by a face model.
    fn landmarks(&self, _img: &Image) -> Option<Result<LandmarkSet, MatchError>> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(v: Vec<f64>) -> Embedding {
        Embedding::normalized(v, EmbeddingSource::Toy).unwrap()
    }

    #[test]
    fn distance_basics() {
        let e0 = Embedding::basis(4, 0, EmbeddingSource::Toy);
        let e1 = Embedding::basis(4, 1, EmbeddingSource::Toy);
        assert_eq!(distance(&e0, &e0).unwrap(), 0.0);
        assert!((distance(&e0, &e1).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let e5 = Embedding::basis(5, 0, EmbeddingSource::Toy);
        assert!(matches!(distance(&e0, &e5), Err(MatchError::DimMismatch(4, 5))));
    }

    #[test]
    fn decision_boundary_is_inclusive() {
        let e0 = Embedding::basis(2, 0, EmbeddingSource::Toy);
        let e1 = Embedding::basis(2, 1, EmbeddingSource::Toy);
        assert!(match_embeddings(&e0, &e0, 0.1).unwrap().accepted);
        let d = distance(&e0, &e1).unwrap();
        assert!(match_embeddings(&e0, &e1, d).unwrap().accepted);
        assert!(!match_embeddings(&e0, &e1, d - 1e-12).unwrap().accepted);
    }

    #[test]
    fn normalization_rejects_degenerate() {
        assert!(Embedding::normalized(vec![], EmbeddingSource::Toy).is_none());
        assert!(Embedding::normalized(vec![0.0; 3], EmbeddingSource::Toy).is_none());
        assert!(Embedding::normalized(vec![f64::NAN, 1.0], EmbeddingSource::Toy).is_none());
    }

    proptest! {
        #[test]
        fn metric_properties(
            a in prop::collection::vec(-1.0f64..1.0, 8),
            b in prop::collection::vec(-1.0f64..1.0, 8),
            c in prop::collection::vec(-1.0f64..1.0, 8),
            t in 0.0f64..2.0,
        ) {
            prop_assume!(a.iter().any(|v| v.abs() > 1e-3));
            prop_assume!(b.iter().any(|v| v.abs() > 1e-3));
            prop_assume!(c.iter().any(|v| v.abs() > 1e-3));
            let (a, b, c) = (unit(a), unit(b), unit(c));
            for e in [&a, &b, &c] {
                let n: f64 = e.values().iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!((n - 1.0).abs() < 1e-6);
            }
            let ab = distance(&a, &b).unwrap();
            prop_assert_eq!(ab, distance(&b, &a).unwrap());
            prop_assert!(distance(&a, &c).unwrap() <= ab + distance(&b, &c).unwrap() + 1e-12);
            // Lowering the score never flips an acceptance.
            let d = MatchDecision::from_score(ab, t);
            if d.accepted {
                prop_assert!(MatchDecision::from_score(ab * 0.5, t).accepted);
            }
        }
    }
}
