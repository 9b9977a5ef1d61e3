//! Applies each static-key baseline to one face and prints its distortion
//! and how far the protected template drifts from the unprotected one.
//!
//! ```text
//! cargo run --example baseline_transforms
//! ```

use otb_morph::matcher::{distance, embed_toy};
use otb_morph::raster::{mse, ssim};
use otb_morph::synthface::{render_capture, sample_identity};
use otb_morph::transforms::{apply_transform, TransformKind, TransformSpec};

fn main() -> otb_morph::Result<()> {
    let face = render_capture(&sample_identity(5), 0, 0.05)?.image;
    let plain = embed_toy(&face);
    println!("{:<10} {:>9} {:>7} {:>9} {:>14}", "transform", "strength", "ssim", "mse", "template drift");
    for kind in [TransformKind::Gaussian, TransformKind::Laplacian, TransformKind::Spread, TransformKind::Implode] {
        let spec = TransformSpec::with_default_strength(kind, 7);
        let out = apply_transform(&face, &spec)?;
        println!(
            "{:<10} {:>9.1} {:>7.4} {:>9.2} {:>14.4}",
            format!("{kind:?}").to_lowercase(),
            spec.strength,
            ssim(&face, &out)?,
            mse(&face, &out)?,
            distance(&plain, &embed_toy(&out))?
        );
    }
    Ok(())
}
