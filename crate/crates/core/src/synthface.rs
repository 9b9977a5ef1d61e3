//! Procedural toy faces with ground-truth landmarks.
//!
//! Each identity is a small parameter vector (face oval, eyes, nose, mouth,
//! hair line, region intensities) drawn from a seed. A capture renders the
//! identity on a 128x128 gray canvas with optional jitter: Gaussian feature
//! displacement, a global intensity offset and per-pixel noise.
//!
//! Landmark order (16 points):
//!
//! | index | feature |
//! |-------|---------|
//! | 0-7   | face oval at 0, 45, ..., 315 degrees (image axes, y down) |
//! | 8, 9  | left eye outer, inner corner |
//! | 10, 11| right eye inner, outer corner |
//! | 12    | nose tip |
//! | 13-15 | mouth left corner, lip center, right corner |

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morph::{LandmarkSet, Point};
use crate::raster::{quantize, Image};
use crate::rng;

pub const CANVAS: usize = 128;
pub const LANDMARK_COUNT: usize = 16;
pub const MAX_JITTER: f64 = 0.2;
/// Displacement standard deviation at jitter 1.0, in pixels.
pub const FEATURE_SCALE: f64 = 12.0;
const PIXEL_NOISE_SIGMA: f64 = 2.0;
const OFFSET_SCALE: f64 = 60.0;
const MARGIN: f64 = 4.0;

pub const LANDMARK_NAMES: [&str; LANDMARK_COUNT] = [
    "oval_0", "oval_45", "oval_90", "oval_135", "oval_180", "oval_225", "oval_270", "oval_315",
    "left_eye_outer", "left_eye_inner", "right_eye_inner", "right_eye_outer", "nose_tip",
    "mouth_left", "mouth_center", "mouth_right",
];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("jitter {0} outside [0, {MAX_JITTER}]")]
    JitterOutOfRange(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eye {
    pub center: Point,
    pub rx: f64,
    pub ry: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Levels {
    pub background: f64,
    pub skin: f64,
    pub hair: f64,
    pub eye: f64,
    pub nose: f64,
    pub mouth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityParams {
    pub seed: u64,
    pub oval_center: Point,
    pub oval_axes: (f64, f64),
    /// Fraction of the oval height, measured from its top, covered by hair.
    pub hair_line: f64,
    pub left_eye: Eye,
    pub right_eye: Eye,
    pub nose_tip: Point,
    pub nose_width: f64,
    pub mouth_center: Point,
    pub mouth_width: f64,
    /// Vertical offset of the lip center relative to the corners.
    pub mouth_curve: f64,
    pub levels: Levels,
}

/// One rendered presentation of an identity.
#[derive(Clone, Debug)]
pub struct Capture {
    pub image: Image,
    pub landmarks: LandmarkSet,
    pub identity_id: String,
}

pub fn identity_label(seed: u64) -> String {
    format!("id-{seed:016x}")
}

pub fn sample_identity(seed: u64) -> IdentityParams {
    let mut r = rng::stream(seed, "synthface/identity");
    let cx = r.gen_range(60.0..68.0);
    let cy = r.gen_range(62.0..68.0);
    let a = r.gen_range(34.0..46.0);
    let b = r.gen_range(44.0..52.0);
    let eye_y = cy - b * r.gen_range(0.18..0.34);
    let eye_dx = a * r.gen_range(0.34..0.52);
    let eye_shift = r.gen_range(-2.0..2.0);
    let eye = |r: &mut rng::SimRng, x: f64| Eye {
        center: Point::new(x, eye_y + r.gen_range(-1.0..1.0)),
        rx: r.gen_range(4.5..8.5),
        ry: r.gen_range(2.5..4.5),
    };
    let left_eye = eye(&mut r, cx - eye_dx + eye_shift);
    let right_eye = eye(&mut r, cx + eye_dx + eye_shift);
    let nose_tip = Point::new(cx + r.gen_range(-3.0..3.0), cy + b * r.gen_range(0.02..0.16));
    let nose_width = r.gen_range(6.0..13.0);
    let mouth_center = Point::new(cx + r.gen_range(-3.0..3.0), cy + b * r.gen_range(0.40..0.56));
    let mouth_width = r.gen_range(14.0..28.0);
    let mouth_curve = r.gen_range(-3.0..6.0);
    let skin = r.gen_range(120.0..215.0);
    let levels = Levels {
        background: r.gen_range(15.0..90.0),
        skin,
        hair: r.gen_range(5.0..110.0),
        eye: r.gen_range(5.0..60.0),
        nose: skin - r.gen_range(15.0..45.0),
        mouth: r.gen_range(35.0..110.0),
    };
    IdentityParams {
        seed,
        oval_center: Point::new(cx, cy),
        oval_axes: (a, b),
        hair_line: r.gen_range(0.08..0.22),
        left_eye,
        right_eye,
        nose_tip,
        nose_width,
        mouth_center,
        mouth_width,
        mouth_curve,
        levels,
    }
}

impl IdentityParams {
    /// Checks the frame margin and feature ordering invariants.
    pub fn is_valid(&self) -> bool {
        let lo = MARGIN;
        let hi = CANVAS as f64 - MARGIN;
        let inside = |x: f64, y: f64| x >= lo && x <= hi && y >= lo && y <= hi;
        let (cx, cy) = (self.oval_center.x, self.oval_center.y);
        let (a, b) = self.oval_axes;
        let eyes_ok = [self.left_eye, self.right_eye].iter().all(|e| {
            inside(e.center.x - e.rx, e.center.y - e.ry) && inside(e.center.x + e.rx, e.center.y + e.ry)
        });
        inside(cx - a, cy - b)
            && inside(cx + a, cy + b)
            && eyes_ok
            && inside(self.nose_tip.x, self.nose_tip.y)
            && inside(self.mouth_center.x - self.mouth_width / 2.0, self.mouth_center.y)
            && inside(
                self.mouth_center.x + self.mouth_width / 2.0,
                self.mouth_center.y + self.mouth_curve,
            )
            && self.left_eye.center.x < self.right_eye.center.x
            && self.left_eye.center.y.max(self.right_eye.center.y) < self.nose_tip.y
            && self.nose_tip.y < self.mouth_center.y
    }

    /// The identity as a flat parameter vector.
    pub fn to_vector(&self) -> Vec<f64> {
        let l = &self.levels;
        vec![
            self.oval_center.x,
            self.oval_center.y,
            self.oval_axes.0,
            self.oval_axes.1,
            self.hair_line,
            self.left_eye.center.x,
            self.left_eye.center.y,
            self.left_eye.rx,
            self.left_eye.ry,
            self.right_eye.center.x,
            self.right_eye.center.y,
            self.right_eye.rx,
            self.right_eye.ry,
            self.nose_tip.x,
            self.nose_tip.y,
            self.nose_width,
            self.mouth_center.x,
            self.mouth_center.y,
            self.mouth_width,
            self.mouth_curve,
            l.background,
            l.skin,
            l.hair,
            l.eye,
            l.nose,
            l.mouth,
        ]
    }

    pub fn landmarks(&self) -> Vec<Point> {
        let (cx, cy) = (self.oval_center.x, self.oval_center.y);
        let (a, b) = self.oval_axes;
        let mut pts = Vec::with_capacity(LANDMARK_COUNT);
        for k in 0..8 {
            let th = (k as f64) * std::f64::consts::FRAC_PI_4;
            pts.push(Point::new(cx + a * th.cos(), cy + b * th.sin()));
        }
        let (le, re) = (self.left_eye, self.right_eye);
        pts.push(Point::new(le.center.x - le.rx, le.center.y));
        pts.push(Point::new(le.center.x + le.rx, le.center.y));
        pts.push(Point::new(re.center.x - re.rx, re.center.y));
        pts.push(Point::new(re.center.x + re.rx, re.center.y));
        pts.push(self.nose_tip);
        let m = self.mouth_center;
        let hw = self.mouth_width / 2.0;
        pts.push(Point::new(m.x - hw, m.y));
        pts.push(Point::new(m.x, m.y + self.mouth_curve));
        pts.push(Point::new(m.x + hw, m.y));
        pts
    }

    fn displaced(&self, capture_seed: u64, jitter: f64) -> (IdentityParams, f64) {
        if jitter == 0.0 {
            return (self.clone(), 0.0);
        }
        let sigma = jitter * FEATURE_SCALE;
        let mut r = rng::stream(rng::derive(self.seed, "synthface/capture") ^ capture_seed, "jitter");
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        let mut d = || {
            let v: f64 = normal.sample(&mut r);
            v.clamp(-3.0 * sigma, 3.0 * sigma)
        };
        let mut p = self.clone();
        let shift = |pt: &mut Point, dx: f64, dy: f64| {
            pt.x += dx;
            pt.y += dy;
        };
        shift(&mut p.oval_center, d(), d());
        shift(&mut p.left_eye.center, d(), d());
        shift(&mut p.right_eye.center, d(), d());
        shift(&mut p.nose_tip, d(), d());
        shift(&mut p.mouth_center, d(), d());
        let offset = Normal::new(0.0, jitter * OFFSET_SCALE)
            .expect("finite sigma")
            .sample(&mut r);
        (p, offset)
    }
}

/// Coverage of a shape whose boundary lies at signed distance `d`
/// (negative inside), with a one-pixel ramp.
#[inline]
fn coverage(d: f64) -> f64 {
    (0.5 - d).clamp(0.0, 1.0)
}

#[inline]
fn ellipse_distance(px: f64, py: f64, c: Point, rx: f64, ry: f64) -> f64 {
    let (u, v) = ((px - c.x) / rx, (py - c.y) / ry);
    ((u * u + v * v).sqrt() - 1.0) * rx.min(ry)
}

fn render(p: &IdentityParams, offset: f64, noise_key: Option<u64>) -> Image {
    let l = p.levels;
    let (a, b) = p.oval_axes;
    let hair_y = p.oval_center.y - b + 2.0 * b * p.hair_line;
    let m = p.mouth_center;
    let hw = p.mouth_width / 2.0;
    let mut data = Vec::with_capacity(CANVAS * CANVAS);
    for y in 0..CANVAS {
        for x in 0..CANVAS {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let face = coverage(ellipse_distance(px, py, p.oval_center, a, b));
            let mut v = l.background + (l.skin - l.background) * face;
            let hair = face * coverage(py - hair_y);
            v += (l.hair - v) * hair;
            for e in [p.left_eye, p.right_eye] {
                let c = coverage(ellipse_distance(px, py, e.center, e.rx, e.ry));
                v += (l.eye - v) * c;
            }
            let nose = coverage(ellipse_distance(
                px,
                py,
                p.nose_tip,
                p.nose_width / 2.0,
                p.nose_width / 3.0,
            ));
            v += (l.nose - v) * nose;
            let t = (px - m.x) / hw;
            if t.abs() <= 1.0 + 1.0 / hw {
                let arc_y = m.y + p.mouth_curve * (1.0 - t.clamp(-1.0, 1.0).powi(2));
                let c = coverage((py - arc_y).abs() - 1.5) * coverage((t.abs() - 1.0) * hw);
                v += (l.mouth - v) * c;
            }
            v += offset;
            if let Some(key) = noise_key {
                let i = (y * CANVAS + x) as u64;
                let u1 = rng::counter_unit(key, 2 * i);
                let u2 = rng::counter_unit(key, 2 * i + 1);
                let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                v += PIXEL_NOISE_SIGMA * z;
            }
            data.push(quantize(v));
        }
    }
    Image::gray(CANVAS, CANVAS, data).expect("canvas geometry")
}

/// Renders one capture; `jitter == 0` yields the canonical noiseless capture.
pub fn render_capture(
    id: &IdentityParams,
    capture_seed: u64,
    jitter: f64,
) -> Result<Capture, SynthError> {
    if !(0.0..=MAX_JITTER).contains(&jitter) {
        return Err(SynthError::JitterOutOfRange(jitter));
    }
    let (p, offset) = id.displaced(capture_seed, jitter);
    let noise_key = (jitter > 0.0).then(|| rng::derive(id.seed ^ capture_seed, "synthface/noise"));
    let image = render(&p, offset, noise_key);
    let frame = (CANVAS, CANVAS);
    let pts = p
        .landmarks()
        .into_iter()
        .map(|q| Point::new(q.x.clamp(0.0, CANVAS as f64), q.y.clamp(0.0, CANVAS as f64)))
        .collect();
    let landmarks = LandmarkSet::new(pts, frame).expect("face landmarks span the plane");
    Ok(Capture {
        image,
        landmarks,
        identity_id: identity_label(id.seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_deterministic_and_valid() {
        assert_eq!(sample_identity(9), sample_identity(9));
        for s in 1..=100 {
            let p = sample_identity(s);
            assert!(p.is_valid(), "seed {s}: {p:?}");
        }
        assert_ne!(sample_identity(1).to_vector(), sample_identity(2).to_vector());
    }

    #[test]
    fn canonical_capture_is_bit_exact() {
        let id = sample_identity(4);
        let a = render_capture(&id, 1, 0.0).unwrap();
        let b = render_capture(&id, 99, 0.0).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.landmarks, b.landmarks);
        assert_eq!(a.landmarks.len(), LANDMARK_COUNT);
    }

    #[test]
    fn jittered_captures_differ_but_share_identity() {
        let id = sample_identity(4);
        let a = render_capture(&id, 1, 0.05).unwrap();
        let b = render_capture(&id, 2, 0.05).unwrap();
        assert_eq!(a.identity_id, b.identity_id);
        assert_ne!(a.image, b.image);
        let again = render_capture(&id, 1, 0.05).unwrap();
        assert_eq!(a.image, again.image);
    }

    #[test]
    fn jitter_range_is_enforced() {
        let id = sample_identity(1);
        assert!(matches!(
            render_capture(&id, 0, 0.25),
            Err(SynthError::JitterOutOfRange(_))
        ));
        assert!(render_capture(&id, 0, -0.01).is_err());
        assert!(render_capture(&id, 0, MAX_JITTER).is_ok());
    }

    /// Darkness-weighted centroid over a box around an eye.
    fn eye_centroid(img: &Image, skin: f64, c: Point, rx: f64, ry: f64) -> Point {
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        let x0 = (c.x - rx - 2.0).floor() as usize;
        let x1 = (c.x + rx + 2.0).ceil() as usize;
        let y0 = (c.y - ry - 2.0).floor() as usize;
        let y1 = (c.y + ry + 2.0).ceil() as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let w = (skin - f64::from(img.at(x, y))).max(0.0);
                let w = if w > 10.0 { w } else { 0.0 };
                sx += w * (x as f64 + 0.5);
                sy += w * (y as f64 + 0.5);
                sw += w;
            }
        }
        Point::new(sx / sw, sy / sw)
    }

    #[test]
    fn eye_landmarks_match_rendered_centers() {
        for s in [3u64, 17, 40] {
            let id = sample_identity(s);
            for (seed, jitter) in [(0u64, 0.0), (5, 0.1)] {
                let cap = render_capture(&id, seed, jitter).unwrap();
                let (p, offset) = id.displaced(seed, jitter);
                let lm = cap.landmarks.points();
                for (eye, (i, j)) in [(p.left_eye, (8, 9)), (p.right_eye, (10, 11))] {
                    let mid = Point::new((lm[i].x + lm[j].x) / 2.0, (lm[i].y + lm[j].y) / 2.0);
                    let seen = eye_centroid(&cap.image, id.levels.skin + offset, eye.center, eye.rx, eye.ry);
                    assert!((seen.x - mid.x).abs() < 0.5, "seed {s}: {seen:?} vs {mid:?}");
                    assert!((seen.y - mid.y).abs() < 0.5, "seed {s}: {seen:?} vs {mid:?}");
                }
            }
        }
    }
}
