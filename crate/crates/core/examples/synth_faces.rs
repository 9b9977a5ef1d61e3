//! Renders a few synthetic identities with several jittered captures each
//! and writes them as PGM files with landmark sidecars.
//!
//! ```text
//! cargo run --example synth_faces -- [out_dir]
//! ```

use otb_morph::raster::write_image;
use otb_morph::rng;
use otb_morph::synthface::{identity_label, render_capture, sample_identity, LANDMARK_NAMES};

fn main() -> otb_morph::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synth_faces_out".into());
    std::fs::create_dir_all(&out)?;
    for i in 0..3u64 {
        let id = sample_identity(rng::derive_index(42, i));
        for k in 0..3u64 {
            let jitter = if k == 0 { 0.0 } else { 0.08 };
            let cap = render_capture(&id, rng::derive_index(id.seed, k), jitter)?;
            let path = format!("{out}/{}_{k}.pgm", identity_label(id.seed));
            write_image(&cap.image, &path)?;
            cap.landmarks.write_sidecar(format!("{out}/{}_{k}.lm", identity_label(id.seed)))?;
            if k == 0 {
                let p = cap.landmarks.points()[0];
                println!("{}: {} at ({:.1}, {:.1})", cap.identity_id, LANDMARK_NAMES[0], p.x, p.y);
            }
        }
    }
    println!("wrote 9 captures to {out}/");
    Ok(())
}
