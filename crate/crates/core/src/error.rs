use thiserror::Error;

use crate::attack::ScenarioError;
use crate::eval::EvalError;
use crate::matcher::MatchError;
use crate::morph::MorphError;
use crate::protocol::ProtocolError;
use crate::raster::RasterError;
use crate::synthface::SynthError;
use crate::transforms::TransformError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error; every module error converts into it.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Morph(#[from] MorphError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    /// A simulation step produced an outcome the runner cannot continue from.
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
