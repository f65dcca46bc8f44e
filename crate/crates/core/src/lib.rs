//! Spatial and spectral super-resolution for a camera array with notch
//! filters.
//!
//! Nine apertures each see the scene through a different notch filter (one
//! is unfiltered) with a sub-pixel offset. Reconstruction runs three stages:
//!
//! 1. [`masr`]: multi-aperture maximum-likelihood super-resolution of a
//!    near-panchromatic image from all captures;
//! 2. [`pansharpen`]: FISTA fusion lifting every capture to high resolution
//!    with a vector-TV prior tied to the pan image;
//! 3. [`specrecon`]: ADMM recovery of the full spectral cube over a K-SVD
//!    dictionary.
//!
//! [`simulate`] provides the forward model and [`metrics`] the evaluation.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cube;
pub mod cubefile;
pub mod dictionary;
pub mod error;
pub mod masr;
pub mod metrics;
pub mod operators;
mod par;
pub mod params;
pub mod pansharpen;
pub mod pipeline;
pub mod scene;
pub mod simulate;
pub mod specrecon;
pub mod vtv;

pub use cube::{apply_filter, cube_band, BandImage, FilterBank, GeometricTransform, NotchFilter, SpectralCube};
pub use error::{Result, SsrError};
pub use params::{Momentum, PansharpenParams, SpecReconParams, SsrParams, VtvParams};
pub use simulate::{sr_factor, ApertureStack, Capture, OpticsSpec};
pub use vtv::MultiBandField;
