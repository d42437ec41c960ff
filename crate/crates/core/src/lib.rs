//! Spatiotemporal interest points and colour-aware local video descriptors.
//!
//! The crate covers the whole extraction and recognition chain:
//!
//! - [`video_io`]: clip decoding (Y4M, image sequences) and the dataset manifest.
//! - [`scalespace`]: separable anisotropic Gaussian smoothing and gradients.
//! - [`detector`]: the Harris3D detector (second-moment matrix, extended
//!   Harris response, non-maximum suppression over a scale set).
//! - [`descriptor`]: HoG, HoF and saturation-weighted hue histograms and
//!   their concatenations HoGHoF (STIP) and HueSTIP.
//! - [`bof`]: random-sample visual vocabularies and bag-of-features encoding.
//! - [`classifier`]: linear soft-margin SVM, one-vs-one voting and evaluation.
//! - [`synthgen`]: deterministic synthetic clips with known ground truth.
//! - [`pipeline`]: the cached extract → vocab → encode → train → eval run.

pub mod bof;
pub mod classifier;
pub mod descriptor;
pub mod detector;
mod error;
pub mod pipeline;
pub mod scalespace;
pub mod synthgen;
pub mod video_io;
mod volume;

pub use error::{Error, Result};
pub use volume::{Dims, ScalarVolume};
