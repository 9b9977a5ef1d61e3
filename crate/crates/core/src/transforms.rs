//! Static-key cancelable transforms used as baselines.
//!
//! Every transform is a pure function of the image and a [`TransformSpec`];
//! the seed plays the role of the permanent auxiliary data, so applying the
//! same spec twice yields the same bytes. Per-pixel randomness is indexed by
//! pixel position, which keeps results independent of evaluation order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morph::Point;
use crate::raster::{quantize, Image};
use crate::rng::{counter_u64, counter_unit, derive};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("transform strength must be finite and non-negative, got {0}")]
    InvalidStrength(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransformKind {
    None,
    Gaussian,
    Laplacian,
    Spread,
    Implode,
}

impl TransformKind {
    /// Default strength: sigma 30, scale 20, radius 6 px, amount 1.0.
    pub fn default_strength(self) -> f64 {
        match self {
            TransformKind::None => 0.0,
            TransformKind::Gaussian => 30.0,
            TransformKind::Laplacian => 20.0,
            TransformKind::Spread => 6.0,
            TransformKind::Implode => 1.0,
        }
    }
}

/// Transform kind, seed (auxiliary data) and strength.
///
/// Strength is sigma for `gaussian`, the scale `b` for `laplacian`, the
/// Chebyshev radius in pixels for `spread` (rounded down) and the amount `a`
/// for `implode`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub seed: u64,
    pub strength: f64,
}

impl TransformSpec {
    pub fn new(kind: TransformKind, seed: u64, strength: f64) -> Result<Self, TransformError> {
        let spec = Self {
            kind,
            seed,
            strength,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_default_strength(kind: TransformKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            strength: kind.default_strength(),
        }
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        if !self.strength.is_finite() || self.strength < 0.0 {
            return Err(TransformError::InvalidStrength(self.strength));
        }
        Ok(())
    }
}

pub fn apply_transform(img: &Image, spec: &TransformSpec) -> Result<Image, TransformError> {
    spec.validate()?;
    let out = match spec.kind {
        TransformKind::None => img.clone(),
        TransformKind::Gaussian => additive_noise(img, spec, |key, i| {
            let u1 = counter_unit(key, 2 * i);
            let u2 = counter_unit(key, 2 * i + 1);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        }),
        TransformKind::Laplacian => additive_noise(img, spec, |key, i| {
            // Inverse CDF of the unit Laplace distribution.
            let u = counter_unit(key, i) - 0.5;
            -u.signum() * (1.0 - 2.0 * u.abs()).ln()
        }),
        TransformKind::Spread => spread(img, spec),
        TransformKind::Implode => implode(img, spec.strength),
    };
    Ok(out)
}

fn additive_noise(img: &Image, spec: &TransformSpec, unit: impl Fn(u64, u64) -> f64) -> Image {
    if spec.strength == 0.0 {
        return img.clone();
    }
    let key = derive(spec.seed, "transform/noise");
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| quantize(f64::from(v) + spec.strength * unit(key, i as u64)))
        .collect();
    Image::new(img.width(), img.height(), img.channels(), data).expect("same geometry")
}

fn spread(img: &Image, spec: &TransformSpec) -> Image {
    let r = spec.strength.floor() as i64;
    if r == 0 {
        return img.clone();
    }
    let (w, h, ch) = img.dims();
    let key = derive(spec.seed, "transform/spread");
    let side = (2 * r + 1) as u64;
    let src = img.data();
    let mut data = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in 0..w {
            let pick = counter_u64(key, (y * w + x) as u64) % (side * side);
            let dx = (pick % side) as i64 - r;
            let dy = (pick / side) as i64 - r;
            let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
            let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
            let base = (sy * w + sx) * ch;
            data.extend_from_slice(&src[base..base + ch]);
        }
    }
    Image::new(w, h, ch, data).expect("same geometry")
}

/// Radial remap about the image center: a destination pixel at normalized
/// radius `rho` samples the source at `rho^(1 / (1 + a))` on the same ray.
/// Radii are normalized by the half-diagonal.
fn implode(img: &Image, amount: f64) -> Image {
    let (w, h, ch) = img.dims();
    let center = Point::new(w as f64 / 2.0, h as f64 / 2.0);
    let rmax = center.x.hypot(center.y);
    let exponent = 1.0 / (1.0 + amount);
    let mut data = Vec::with_capacity(img.data().len());
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 + 0.5 - center.x;
            let dy = y as f64 + 0.5 - center.y;
            let r = dx.hypot(dy);
            let (sx, sy) = if r == 0.0 {
                (center.x, center.y)
            } else {
                let rho = r / rmax;
                let scale = rho.powf(exponent) / rho;
                (center.x + dx * scale, center.y + dy * scale)
            };
            for c in 0..ch {
                data.push(quantize(crate::morph::sample(img, c, sx, sy)));
            }
        }
    }
    Image::new(w, h, ch, data).expect("same geometry")
}
