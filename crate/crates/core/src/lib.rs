//! Pixel-as-player MRF labeling and the supporting scene-recognition pipeline.
//!
//! The crate is organized bottom-up:
//!
//! - [`image`]: grayscale/RGB rasters, the binary PGM/PPM codec and a
//!   procedural five-class scene generator.
//! - [`preprocess`]: histogram equalization, ideal-mask frequency filtering,
//!   one-level Haar enhancement and a least-squares bias fit.
//! - [`gmm`]: one-dimensional Gaussian mixtures fitted by EM; supplies the
//!   per-pixel data costs of the labeling game.
//! - [`mrf`]: the labeling game itself. Every pixel is a player whose payoff
//!   is the negative of its local energy, so best-response dynamics descend
//!   the shared MRF energy and stop at a Nash labeling.
//! - [`features`]: block features, agglomerative feature selection, simplex
//!   weight optimization and an equality/inequality QP step.
//! - [`net`]: a small CNN trained with triplet and cross-entropy losses.
//! - [`harness`]: run configuration, keyframe policy and the accuracy
//!   experiment that emits the report CSV.
//!
//! With the default `parallel` feature the data-parallel loops (EM rows,
//! exhaustive enumeration, checkerboard half-sweeps, batch gradients,
//! experiment cells) run on rayon. Without it they run sequentially. Both
//! paths produce bit-identical results.

pub mod features;
pub mod gmm;
pub mod harness;
pub mod image;
pub mod linalg;
pub mod mrf;
pub mod net;
mod par;
pub mod preprocess;

pub use image::{DisplacementLabelSet, Image, LabelField};
