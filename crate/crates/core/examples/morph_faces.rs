//! Morphs two synthetic faces across a range of weights and reports how
//! far each morph sits from both inputs.
//!
//! ```text
//! cargo run --example morph_faces -- [out_dir]
//! ```

use otb_morph::morph::{delaunay, morph, MorphParams};
use otb_morph::raster::{mse, ssim, write_image};
use otb_morph::synthface::{render_capture, sample_identity};

fn main() -> otb_morph::Result<()> {
    let out = std::env::args().nth(1);
    let a = render_capture(&sample_identity(1), 0, 0.0)?;
    let b = render_capture(&sample_identity(2), 0, 0.0)?;

    let mesh = delaunay(&a.landmarks)?;
    println!("mesh: {} points, {} triangles", mesh.points().len(), mesh.triangles().len());

    println!("{:>6} {:>10} {:>8} {:>10} {:>8}", "alpha", "mse(a)", "ssim(a)", "mse(b)", "ssim(b)");
    for step in 0..=4 {
        let alpha = step as f64 / 4.0;
        let m = morph(&a.image, &a.landmarks, &b.image, &b.landmarks, MorphParams::new(alpha)?)?;
        println!(
            "{alpha:>6.2} {:>10.2} {:>8.4} {:>10.2} {:>8.4}",
            mse(&m, &a.image)?,
            ssim(&m, &a.image)?,
            mse(&m, &b.image)?,
            ssim(&m, &b.image)?
        );
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir)?;
            write_image(&m, format!("{dir}/morph_{step}.pgm"))?;
        }
    }
    Ok(())
}
