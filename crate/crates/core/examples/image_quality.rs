//! MSE and SSIM between two PGM/PPM files.
//!
//! ```text
//! cargo run --example image_quality -- a.pgm b.pgm
//! ```

use otb_morph::raster::{mse, read_image, ssim};

fn main() -> otb_morph::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let [a, b] = args.as_slice() else {
        eprintln!("usage: image_quality <a> <b>");
        std::process::exit(2);
    };
    let (a, b) = (read_image(a)?, read_image(b)?);
    println!("mse  {:.4}", mse(&a, &b)?);
    println!("ssim {:.6}", ssim(&a, &b)?);
    Ok(())
}
