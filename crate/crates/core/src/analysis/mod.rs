//! Reconstruction metrics and the covering-number and error-bound
//! calculators.

mod bounds;
mod metrics;

pub use bounds::{BoundParams, BoundTerms, cover_bound_h, cover_bound_xunn, prop_bound_terms};
pub use metrics::{SsimParams, nmse, ssim_band, ssim_log_avg};
