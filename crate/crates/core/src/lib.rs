//! Continuous motion flow for point cloud sequences.
//!
//! A shared MLP decoder (the *morpher*) maps a point concatenated with a
//! per-pair latent code to a 3D displacement. Decoder weights and latent codes
//! are fitted jointly with a Chamfer loss between the displaced source cloud
//! and the next frame; no ground-truth correspondences are used. At test time
//! the decoder is frozen, a fresh latent is optimized against an observed pair
//! of frames, and the same latent is reused to push the newer frame one step
//! into the future.

pub mod chamfer;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod inference;
pub mod io_formats;
pub mod metrics;
pub mod morpher;
pub mod rng;
pub mod synth;
pub mod training;

mod gemm;

pub use error::{Error, Result};
pub use geometry::{Episode, FlowField, NormalizeTransform, Point3, PointCloud};

/// Floating point type used for all geometry and parameters.
#[cfg(not(feature = "single-precision"))]
pub type Real = f64;

/// Floating point type used for all geometry and parameters.
#[cfg(feature = "single-precision")]
pub type Real = f32;
