//! Face-morph generation, Gram-matrix style enhancement of morphs, classical
//! morphing-attack detectors, and presentation-attack metrics.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common instantiations.

pub mod container;
pub mod detectors;
pub mod error;
pub mod evalkit;
pub mod imagekit;
pub mod morphgen;
pub mod postprocess;
pub mod scalar;
pub mod styletransfer;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ImageF64 = imagekit::Image<f64>;
pub type ImageF32 = imagekit::Image<f32>;
pub type ConvNetF64 = styletransfer::ConvNet<f64>;
pub type ConvNetF32 = styletransfer::ConvNet<f32>;
pub type FeatureMapsF64 = styletransfer::FeatureMaps<f64>;
pub type StyleTargetF64 = styletransfer::StyleTarget<f64>;
