use crate::raster::Image;

use super::{Embedder, Embedding, EmbeddingSource, MatchError};

/// Grid cells per side; the embedding has `GRID * GRID` entries.
pub const GRID: usize = 16;

/// Grid-of-means embedder: mean intensity per cell of a 16x16 grid, minus
/// the global mean, L2-normalized. A constant image maps to `e_0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ToyEmbedder;

pub fn embed_toy(img: &Image) -> Embedding {
    let g = img.to_gray();
    let (w, h) = (g.width(), g.height());
    let bounds = |i: usize, n: usize| {
        let lo = i * n / GRID;
        let hi = ((i + 1) * n / GRID).max(lo + 1).min(n);
        (lo.min(n - 1), hi)
    };
    let mut cells = Vec::with_capacity(GRID * GRID);
    for gy in 0..GRID {
        let (y0, y1) = bounds(gy, h);
        for gx in 0..GRID {
            let (x0, x1) = bounds(gx, w);
            let mut sum = 0u64;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += u64::from(g.at(x, y));
                }
            }
            cells.push(sum as f64 / ((y1 - y0) * (x1 - x0)) as f64);
        }
    }
    let mean = cells.iter().sum::<f64>() / cells.len() as f64;
    let centered: Vec<f64> = cells.iter().map(|c| c - mean).collect();
    Embedding::normalized(centered, EmbeddingSource::Toy)
        .unwrap_or_else(|| Embedding::basis(GRID * GRID, 0, EmbeddingSource::Toy))
}

impl Embedder for ToyEmbedder {
    fn embed(&self, img: &Image) -> Result<Embedding, MatchError> {
        Ok(embed_toy(img))
    }

    fn dim(&self) -> usize {
        GRID * GRID
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::distance;
    use crate::synthface::{render_capture, sample_identity};

    #[test]
    fn constant_image_falls_back_to_e0() {
        let e = embed_toy(&Image::filled(128, 128, 90));
        assert_eq!(e, Embedding::basis(256, 0, EmbeddingSource::Toy));
    }

    #[test]
    fn deterministic_and_unit_norm() {
        let cap = render_capture(&sample_identity(5), 1, 0.1).unwrap();
        let a = embed_toy(&cap.image);
        assert_eq!(a, embed_toy(&cap.image));
        let n: f64 = a.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-9);
        assert_eq!(a.dim(), 256);
    }

    #[test]
    fn small_and_rgb_images_embed() {
        let img = Image::new(5, 3, 3, (0..45).map(|i| (i * 5) as u8).collect()).unwrap();
        assert_eq!(embed_toy(&img).dim(), 256);
    }

    #[test]
    fn same_identity_closer_than_other_identity() {
        let mut wins = 0;
        for t in 0..50u64 {
            let id = sample_identity(1000 + t);
            let other = sample_identity(5000 + t);
            let a = embed_toy(&render_capture(&id, 1, 0.05).unwrap().image);
            let b = embed_toy(&render_capture(&id, 2, 0.05).unwrap().image);
            let c = embed_toy(&render_capture(&other, 3, 0.05).unwrap().image);
            if distance(&a, &b).unwrap() < distance(&a, &c).unwrap() {
                wins += 1;
            }
        }
        assert!(wins >= 45, "only {wins}/50 trials separated");
    }
}
