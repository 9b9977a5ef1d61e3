use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MorphError;

/// A 2-D point in continuous pixel coordinates; pixel `(x, y)` has its
/// center at `(x + 0.5, y + 0.5)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub(crate) fn coord(self) -> robust::Coord<f64> {
        robust::Coord {
            x: self.x,
            y: self.y,
        }
    }
}

/// Ordered control points over a `width x height` frame.
///
/// Two sets correspond when they have the same length; index `i` names the
/// same facial feature in both.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    points: Vec<Point>,
    frame: (usize, usize),
}

impl LandmarkSet {
    pub fn new(points: Vec<Point>, frame: (usize, usize)) -> Result<Self, MorphError> {
        if frame.0 == 0 || frame.1 == 0 {
            return Err(MorphError::EmptyFrame);
        }
        let (w, h) = (frame.0 as f64, frame.1 as f64);
        for (index, p) in points.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(MorphError::NonFinite { index });
            }
            if p.x < 0.0 || p.y < 0.0 || p.x > w || p.y > h {
                return Err(MorphError::OutOfFrame {
                    index,
                    x: p.x,
                    y: p.y,
                });
            }
        }
        if points.len() < 3 {
            return Err(MorphError::TooFewPoints(points.len()));
        }
        let a = points[0].coord();
        let spans_plane = points.iter().skip(1).any(|p| {
            let b = p.coord();
            points
                .iter()
                .any(|q| robust::orient2d(a, b, q.coord()) != 0.0)
        });
        if !spans_plane {
            return Err(MorphError::Collinear);
        }
        Ok(Self { points, frame })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn frame(&self) -> (usize, usize) {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn corresponds(&self, other: &LandmarkSet) -> bool {
        self.points.len() == other.points.len()
    }

    /// Landmarks followed by the four frame corners in the order
    /// top-left, top-right, bottom-right, bottom-left.
    pub fn with_frame_corners(&self) -> Vec<Point> {
        let (w, h) = (self.frame.0 as f64, self.frame.1 as f64);
        let mut pts = self.points.clone();
        pts.extend([
            Point::new(0.0, 0.0),
            Point::new(w, 0.0),
            Point::new(w, h),
            Point::new(0.0, h),
        ]);
        pts
    }

    /// Sidecar text: the point count, then one `x y` line per point.
    pub fn to_sidecar(&self) -> String {
        let mut s = format!("{}\n", self.points.len());
        for p in &self.points {
            let _ = writeln!(s, "{} {}", p.x, p.y);
        }
        s
    }

    pub fn from_sidecar(text: &str, frame: (usize, usize)) -> Result<Self, MorphError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let count: usize = lines
            .next()
            .and_then(|l| l.parse().ok())
            .ok_or_else(|| MorphError::Sidecar("missing point count".into()))?;
        let mut points = Vec::with_capacity(count);
        for (i, line) in lines.by_ref().take(count).enumerate() {
            let mut it = line.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => points.push(Point::new(x, y)),
                _ => return Err(MorphError::Sidecar(format!("bad point line {}: {line:?}", i + 2))),
            }
        }
        if points.len() != count {
            return Err(MorphError::Sidecar(format!(
                "expected {count} points, found {}",
                points.len()
            )));
        }
        if lines.next().is_some() {
            return Err(MorphError::Sidecar("trailing lines after points".into()));
        }
        Self::new(points, frame)
    }

    pub fn read_sidecar(path: impl AsRef<Path>, frame: (usize, usize)) -> Result<Self, MorphError> {
        let text = std::fs::read_to_string(path).map_err(|e| MorphError::Sidecar(e.to_string()))?;
        Self::from_sidecar(&text, frame)
    }

    pub fn write_sidecar(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp-write");
        std::fs::write(&tmp, self.to_sidecar())?;
        std::fs::rename(tmp, path)
    }
}
