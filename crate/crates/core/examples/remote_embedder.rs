//! Scores a genuine and an impostor pair through an external embedding
//! service speaking the `/v1/info` + `/v1/embed` HTTP API.
//!
//! ```text
//! cargo run --example remote_embedder -- http://127.0.0.1:8000
//! ```

use otb_morph::matcher::{distance, Embedder, RemoteEmbedder};
use otb_morph::synthface::{render_capture, sample_identity};

fn main() -> otb_morph::Result<()> {
    let Some(endpoint) = std::env::args().nth(1) else {
        eprintln!("usage: remote_embedder <endpoint>");
        std::process::exit(2);
    };
    let remote = RemoteEmbedder::connect(&endpoint)?;
    let info = remote.info();
    println!("{} v{}: {}-d embeddings, {} landmarks", info.model_name, info.version, info.embedding_dim, info.landmark_count);

    let (a, b) = (sample_identity(1), sample_identity(2));
    let a0 = remote.embed(&render_capture(&a, 0, 0.05)?.image)?;
    let a1 = remote.embed(&render_capture(&a, 1, 0.05)?.image)?;
    let b0 = remote.embed(&render_capture(&b, 0, 0.05)?.image)?;
    println!("genuine  {:.4}", distance(&a0, &a1)?);
    println!("impostor {:.4}", distance(&a0, &b0)?);
    Ok(())
}
