//! Hybrid SAR detection dataset synthesis and evaluation.
//!
//! Simulated target chips are incrusted into clutter backgrounds through a
//! complex-domain overlay pipeline, labelled automatically, and scored with
//! an IoU / precision-recall / average-precision protocol. A CA-CFAR detector
//! closes the generate, detect, evaluate loop.

pub mod dataset;
pub mod detect;
pub mod error;
mod fft;
pub mod formats;
pub mod metrics;
pub mod overlay;
pub mod patchwork;
pub mod raster;
pub mod rng;
pub mod sensor;
pub mod sim;

pub use error::{Error, Result};
pub use raster::{label, BBox, ComplexRaster, Gray8, Mask, Role, TargetChip};
pub use rng::{derive_stream, SeedSpec, Stream};
