use crate::raster::{quantize, Image};

use super::delaunay::{for_each_covered_pixel, Triangulation};
use super::{LandmarkSet, MorphError, Point};

/// Affine map taking one triangle onto another, vertex to vertex.
#[derive(Clone, Copy, Debug)]
pub struct AffineMap {
    // [a b c; d e f] applied to (x, y, 1).
    m: [f64; 6],
}

impl AffineMap {
    /// Map sending `from[i]` to `to[i]`; `None` if `from` is degenerate.
    pub fn between(from: [Point; 3], to: [Point; 3]) -> Option<Self> {
        let (ux, uy) = (from[1].x - from[0].x, from[1].y - from[0].y);
        let (vx, vy) = (from[2].x - from[0].x, from[2].y - from[0].y);
        let det = ux * vy - uy * vx;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        // Inverse of [u v] maps from-offsets to barycentric (s, t).
        let (i00, i01, i10, i11) = (vy / det, -vx / det, -uy / det, ux / det);
        let (px, py) = (to[1].x - to[0].x, to[1].y - to[0].y);
        let (qx, qy) = (to[2].x - to[0].x, to[2].y - to[0].y);
        let a = px * i00 + qx * i10;
        let b = px * i01 + qx * i11;
        let d = py * i00 + qy * i10;
        let e = py * i01 + qy * i11;
        let c = to[0].x - a * from[0].x - b * from[0].y;
        let f = to[0].y - d * from[0].x - e * from[0].y;
        Some(Self {
            m: [a, b, c, d, e, f],
        })
    }

    #[inline]
    pub fn apply(&self, p: Point) -> Point {
        let m = &self.m;
        Point::new(m[0] * p.x + m[1] * p.y + m[2], m[3] * p.x + m[4] * p.y + m[5])
    }
}

/// Bilinear sample at continuous coordinates, clamping to the frame edge.
#[inline]
pub(crate) fn sample_bilinear(img: &Image, channel: usize, x: f64, y: f64) -> f64 {
    let (w, h, ch) = img.dims();
    let fx = (x - 0.5).clamp(0.0, (w - 1) as f64);
    let fy = (y - 0.5).clamp(0.0, (h - 1) as f64);
    let x0 = fx.floor() as usize;
    let y0 = fy.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let tx = fx - x0 as f64;
    let ty = fy - y0 as f64;
    let d = img.data();
    let s = |xx: usize, yy: usize| f64::from(d[(yy * w + xx) * ch + channel]);
    let top = s(x0, y0) * (1.0 - tx) + s(x1, y0) * tx;
    let bot = s(x0, y1) * (1.0 - tx) + s(x1, y1) * tx;
    top * (1.0 - ty) + bot * ty
}

/// Piecewise-affine warp into an unrounded sample buffer (interleaved).
pub(crate) fn warp_samples(
    img: &Image,
    src: &[Point],
    dst: &[Point],
    tri: &Triangulation,
) -> Vec<f64> {
    let (w, h, ch) = img.dims();
    let mut out = vec![0.0; w * h * ch];
    for t in tri.triangles() {
        let d = [dst[t[0]], dst[t[1]], dst[t[2]]];
        let s = [src[t[0]], src[t[1]], src[t[2]]];
        let Some(map) = AffineMap::between(d, s) else {
            continue;
        };
        for_each_covered_pixel(d, w, h, |x, y| {
            let q = map.apply(Point::new(x as f64 + 0.5, y as f64 + 0.5));
            let base = (y * w + x) * ch;
            for c in 0..ch {
                out[base + c] = sample_bilinear(img, c, q.x, q.y);
            }
        });
    }
    out
}

fn check_pair(img: &Image, src: &LandmarkSet, dst: &LandmarkSet) -> Result<(), MorphError> {
    if !src.corresponds(dst) {
        return Err(MorphError::LengthMismatch(src.len(), dst.len()));
    }
    let frame = (img.width(), img.height());
    if src.frame() != frame || dst.frame() != frame {
        return Err(MorphError::FrameMismatch {
            image: frame,
            landmarks: if src.frame() != frame { src.frame() } else { dst.frame() },
        });
    }
    Ok(())
}

/// Resamples `img` so that its `src` landmarks land on `dst`.
///
/// `tri` must be built on `dst` (with frame corners); each destination
/// triangle pulls pixels from the matching source triangle through their
/// affine map, with bilinear interpolation and edge clamping.
pub fn warp_to(
    img: &Image,
    src: &LandmarkSet,
    dst: &LandmarkSet,
    tri: &Triangulation,
) -> Result<Image, MorphError> {
    check_pair(img, src, dst)?;
    let (srcp, dstp) = extend_pair(src, dst, tri)?;
    let samples = warp_samples(img, &srcp, &dstp, tri);
    let data = samples.into_iter().map(quantize).collect();
    Ok(Image::new(img.width(), img.height(), img.channels(), data)?)
}

pub(crate) fn extend_pair(
    src: &LandmarkSet,
    dst: &LandmarkSet,
    tri: &Triangulation,
) -> Result<(Vec<Point>, Vec<Point>), MorphError> {
    if tri.landmark_count() != dst.len() {
        return Err(MorphError::LengthMismatch(tri.landmark_count(), dst.len()));
    }
    if tri.has_frame_corners() {
        Ok((src.with_frame_corners(), dst.with_frame_corners()))
    } else {
        Ok((src.points().to_vec(), dst.points().to_vec()))
    }
}
