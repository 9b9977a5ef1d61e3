//! Landmark-based face morphing.
//!
//! The pipeline averages corresponding landmarks, triangulates the average
//! once (with the frame corners appended so the mesh covers the image),
//! warps both inputs onto that shared mesh, and blends the warped samples.

mod delaunay;
mod landmarks;
mod warp;

pub use delaunay::{delaunay, delaunay_points, Triangulation};
pub use landmarks::{LandmarkSet, Point};
pub use warp::{warp_to, AffineMap};
pub(crate) use warp::sample_bilinear as sample;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{quantize, Image, RasterError};

#[derive(Debug, Error)]
pub enum MorphError {
    #[error("need at least 3 distinct points, got {0}")]
    TooFewPoints(usize),
    #[error("all points are collinear")]
    Collinear,
    #[error("point {index} is not finite")]
    NonFinite { index: usize },
    #[error("point {index} ({x}, {y}) lies outside the frame")]
    OutOfFrame { index: usize, x: f64, y: f64 },
    #[error("landmark frame must be non-empty")]
    EmptyFrame,
    #[error("landmark sets do not correspond: {0} vs {1} points")]
    LengthMismatch(usize, usize),
    #[error("landmark frame {landmarks:?} does not match image {image:?}")]
    FrameMismatch {
        image: (usize, usize),
        landmarks: (usize, usize),
    },
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("landmark sidecar: {0}")]
    Sidecar(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Blend weight of the second face.
///
/// Alpha is snapped to a multiple of 2^-20 so that `1 - alpha` is exact and
/// swapping the two inputs with `1 - alpha` reproduces the same morph bit for
/// bit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MorphParams {
    alpha: f64,
}

const ALPHA_GRID: f64 = (1u64 << 20) as f64;

impl MorphParams {
    /// The operating point used by every scheme run.
    pub const HALF: MorphParams = MorphParams { alpha: 0.5 };

    pub fn new(alpha: f64) -> Result<Self, MorphError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(MorphError::InvalidAlpha(alpha));
        }
        Ok(Self {
            alpha: (alpha * ALPHA_GRID).round() / ALPHA_GRID,
        })
    }

    pub fn alpha(self) -> f64 {
        self.alpha
    }

    /// Parameters for the same morph with the inputs swapped.
    pub fn complement(self) -> Self {
        Self {
            alpha: 1.0 - self.alpha,
        }
    }
}

impl Default for MorphParams {
    fn default() -> Self {
        Self::HALF
    }
}

impl TryFrom<f64> for MorphParams {
    type Error = MorphError;
    fn try_from(v: f64) -> Result<Self, MorphError> {
        Self::new(v)
    }
}

impl From<MorphParams> for f64 {
    fn from(p: MorphParams) -> f64 {
        p.alpha
    }
}

/// `(1 - alpha) * a_i + alpha * b_i` for every landmark.
pub fn average_landmarks(
    a: &LandmarkSet,
    b: &LandmarkSet,
    p: MorphParams,
) -> Result<LandmarkSet, MorphError> {
    if !a.corresponds(b) {
        return Err(MorphError::LengthMismatch(a.len(), b.len()));
    }
    if a.frame() != b.frame() {
        return Err(MorphError::FrameMismatch {
            image: a.frame(),
            landmarks: b.frame(),
        });
    }
    let (wa, wb) = (1.0 - p.alpha, p.alpha);
    let points = a
        .points()
        .iter()
        .zip(b.points())
        .map(|(pa, pb)| Point::new(wa * pa.x + wb * pb.x, wa * pa.y + wb * pb.y))
        .collect();
    LandmarkSet::new(points, a.frame())
}

/// Morphs `a` (weight `1 - alpha`) with `b` (weight `alpha`).
pub fn morph(
    a: &Image,
    la: &LandmarkSet,
    b: &Image,
    lb: &LandmarkSet,
    p: MorphParams,
) -> Result<Image, MorphError> {
    a.same_shape(b)?;
    let frame = (a.width(), a.height());
    for l in [la, lb] {
        if l.frame() != frame {
            return Err(MorphError::FrameMismatch {
                image: frame,
                landmarks: l.frame(),
            });
        }
    }
    let mid = average_landmarks(la, lb, p)?;
    let tri = delaunay(&mid)?;
    let (sa, dst) = warp::extend_pair(la, &mid, &tri)?;
    let (sb, _) = warp::extend_pair(lb, &mid, &tri)?;
    let wa = warp::warp_samples(a, &sa, &dst, &tri);
    let wb = warp::warp_samples(b, &sb, &dst, &tri);
    let (ka, kb) = (1.0 - p.alpha, p.alpha);
    let data = wa
        .iter()
        .zip(&wb)
        .map(|(&x, &y)| quantize(ka * x + kb * y))
        .collect();
    Ok(Image::new(a.width(), a.height(), a.channels(), data)?)
}
