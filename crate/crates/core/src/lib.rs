//! Spectrum cartography with a domain-factored untrained deep decoder.
//!
//! The crate covers the whole pipeline: synthetic multi-emitter radio maps,
//! sparse (optionally quantized) sensing, recovery by fitting a shared deep
//! decoder per emitter together with nonnegative PSDs, classical baselines,
//! and evaluation (log-domain SSIM, NMSE, covering-number bounds).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adam;
pub mod analysis;
pub mod baselines;
pub mod config;
pub mod decoder;
pub mod error;
pub mod io;
pub mod mask;
pub mod objectives;
pub mod seed;
pub mod solver;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use mask::{Measurements, SamplingMask, apply_mask, mask_sample};
pub use seed::Seed;
pub use tensor::{PsdMatrix, RadioMapTensor, SlfMatrix};
