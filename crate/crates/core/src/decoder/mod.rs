//! Domain-factored deep decoder: one set of weights θ shared by all emitters,
//! one latent code per emitter, the spatial loss fields combined with the PSD
//! columns by outer products.

mod arch;
mod init;
mod network;
pub mod ops;
mod params;

pub use arch::DecoderArch;
pub use init::{ParamInit, WarmStart, init_params, slf_fit_error};
pub use network::{
    DecoderTrace, Gradients, backward, decode, decode_backward, forward, forward_all,
};
pub use params::{BlockLayout, DecoderParams, LatentCodes, ParamLayout};
