//! One-time biometrics via morphing (OTB-morph).
//!
//! A hermetic simulator and library for a cancelable-biometrics scheme in which
//! the stored face template is the morph of the client's face with a random
//! face that is replaced after every successful verification. The crate holds
//! every piece needed to run the scheme end to end on procedurally generated
//! faces:
//!
//! * [`raster`]: 8-bit images, binary PGM/PPM I/O, MSE and SSIM.
//! * [`synthface`]: deterministic toy faces with ground-truth landmarks.
//! * [`morph`]: Delaunay triangulation, piecewise-affine warping and blending.
//! * [`transforms`]: the static-key baselines (noise, spread, implode).
//! * [`matcher`]: embeddings, Euclidean dissimilarity and threshold decisions.
//! * [`protocol`]: pseudonym issuance, enrollment and the four-message
//!   verification session with template rotation.
//! * [`attack`]: the score-leakage hill-climbing attacker and scenario runner.
//! * [`eval`]: EER, FRR@FAR, ASR, calibration and report emission.
//!
//! Runnable walk-throughs of each capability live in `examples/`.

pub mod attack;
pub mod error;
pub mod eval;
pub mod matcher;
pub mod morph;
pub mod protocol;
pub mod raster;
pub mod rng;
pub mod synthface;
pub mod transforms;

pub use error::{Error, Result};
pub use raster::Image;
