use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::morph::{LandmarkSet, Point};
use crate::raster::{encode_pnm, Image};

use super::{Embedder, Embedding, EmbeddingSource, MatchError};

/// `GET /v1/info` payload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceInfo {
    pub model_name: String,
    pub embedding_dim: usize,
    pub landmark_count: usize,
    pub version: String,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
}

#[derive(Deserialize)]
struct LandmarksResponse {
    points: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
struct ErrorBody {
    #[serde(default)]
    code: Option<String>,
    #[serde(default)]
    message: Option<String>,
    #[serde(default)]
    error: Option<Box<ErrorBody>>,
}

/// HTTP client for an external embedding service.
///
/// Images are sent as binary PGM/PPM. The advertised dimension is fetched
/// once at connect time and every response is checked against it.
pub struct RemoteEmbedder {
    base: String,
    agent: ureq::Agent,
    info: ServiceInfo,
}

impl std::fmt::Debug for RemoteEmbedder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteEmbedder")
            .field("base", &self.base)
            .field("info", &self.info)
            .finish()
    }
}

impl RemoteEmbedder {
    /// Connects to `endpoint` (e.g. `http://127.0.0.1:8000`) and reads its info.
    pub fn connect(endpoint: &str) -> Result<Self, MatchError> {
        Self::connect_with_timeout(endpoint, Duration::from_secs(30))
    }

    pub fn connect_with_timeout(endpoint: &str, timeout: Duration) -> Result<Self, MatchError> {
        let base = endpoint.trim_end_matches('/').to_string();
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        let resp = agent
            .get(&format!("{base}/v1/info"))
            .call()
            .map_err(classify)?;
        let info: ServiceInfo = resp
            .into_json()
            .map_err(|e| MatchError::MalformedResponse(format!("info: {e}")))?;
        if info.embedding_dim == 0 {
            return Err(MatchError::MalformedResponse("info: embedding_dim is 0".into()));
        }
        Ok(Self { base, agent, info })
    }

    pub fn info(&self) -> &ServiceInfo {
        &self.info
    }

    fn post(&self, path: &str, img: &Image) -> Result<ureq::Response, MatchError> {
        let content_type = if img.is_gray() {
            "image/x-portable-graymap"
        } else {
            "image/x-portable-pixmap"
        };
        self.agent
            .post(&format!("{}{path}", self.base))
            .set("Content-Type", content_type)
            .send_bytes(&encode_pnm(img))
            .map_err(classify)
    }

    /// Landmarks in the pixel space of `img`.
    pub fn detect_landmarks(&self, img: &Image) -> Result<LandmarkSet, MatchError> {
        let body: LandmarksResponse = self
            .post("/v1/landmarks", img)?
            .into_json()
            .map_err(|e| MatchError::MalformedResponse(format!("landmarks: {e}")))?;
        if body.points.len() != self.info.landmark_count {
            return Err(MatchError::MalformedResponse(format!(
                "expected {} landmarks, got {}",
                self.info.landmark_count,
                body.points.len()
            )));
        }
        let pts = body.points.iter().map(|&[x, y]| Point::new(x, y)).collect();
        LandmarkSet::new(pts, (img.width(), img.height()))
            .map_err(|e| MatchError::MalformedResponse(format!("landmarks: {e}")))
    }
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, img: &Image) -> Result<Embedding, MatchError> {
        let body: EmbedResponse = self
            .post("/v1/embed", img)?
            .into_json()
            .map_err(|e| MatchError::MalformedResponse(format!("embed: {e}")))?;
        if body.embedding.len() != self.info.embedding_dim {
            return Err(MatchError::AdvertisedDimMismatch {
                advertised: self.info.embedding_dim,
                got: body.embedding.len(),
            });
        }
        Embedding::normalized(body.embedding, EmbeddingSource::Remote).ok_or_else(|| {
            MatchError::MalformedResponse("embedding is zero or non-finite".into())
        })
    }

    fn dim(&self) -> usize {
        self.info.embedding_dim
    }

    fn landmarks(&self, img: &Image) -> Option<Result<LandmarkSet, MatchError>> {
        Some(self.detect_landmarks(img))
    }
}

/// One-shot convenience: connect, then embed.
pub fn embed_remote(img: &Image, endpoint: &str) -> Result<Embedding, MatchError> {
    RemoteEmbedder::connect(endpoint)?.embed(img)
}

fn classify(err: ureq::Error) -> MatchError {
    match err {
        ureq::Error::Status(status, resp) => {
            let (code, message) = match resp.into_json::<ErrorBody>().ok() {
                Some(ErrorBody {
                    error: Some(inner),
                    ..
                }) => (inner.code, inner.message),
                Some(b) => (b.code, b.message),
                None => (None, None),
            };
            MatchError::Service {
                status,
                code: code.unwrap_or_else(|| "unknown".into()),
                message: message.unwrap_or_default(),
            }
        }
        ureq::Error::Transport(t) => MatchError::Transport(t.to_string()),
    }
}
