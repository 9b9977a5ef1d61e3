//! Genuine and impostor dissimilarities under the toy embedder, with the
//! resulting equal error rate.
//!
//! ```text
//! cargo run --example match_scores
//! ```

use otb_morph::eval::eer;
use otb_morph::matcher::{distance, match_embeddings, Embedder, ToyEmbedder};
use otb_morph::rng;
use otb_morph::synthface::{render_capture, sample_identity};

fn main() -> otb_morph::Result<()> {
    let embedder = ToyEmbedder;
    let ids: Vec<_> = (0..6).map(|i| sample_identity(rng::derive_index(9, i))).collect();
    let mut templates = Vec::new();
    for id in &ids {
        let caps = (0..4)
            .map(|k| embedder.embed(&render_capture(id, rng::derive_index(id.seed, k), 0.1)?.image).map_err(Into::into))
            .collect::<otb_morph::Result<Vec<_>>>()?;
        templates.push(caps);
    }

    let (mut genuine, mut impostor) = (Vec::new(), Vec::new());
    for (i, caps) in templates.iter().enumerate() {
        for probe in &caps[1..] {
            genuine.push(distance(probe, &caps[0])?);
        }
        for (j, other) in templates.iter().enumerate() {
            if i != j {
                impostor.push(distance(&other[1], &caps[0])?);
            }
        }
    }
    let (rate, t) = eer(&genuine, &impostor)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("genuine  n={:<3} mean {:.4}", genuine.len(), mean(&genuine));
    println!("impostor n={:<3} mean {:.4}", impostor.len(), mean(&impostor));
    println!("EER {rate:.4} at threshold {t:.4}");

    let d = match_embeddings(&templates[0][1], &templates[0][0], t)?;
    println!("subject 0 against own reference: score {:.4}, accepted {}", d.score, d.accepted);
    Ok(())
}
