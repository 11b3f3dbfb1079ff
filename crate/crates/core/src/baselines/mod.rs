//! Comparison methods that need no offline training.

mod btd;
mod idw;
mod naive;

pub use btd::{BtdConfig, BtdFactors, btd_fit, btd_objective, btd_recover};
pub use idw::{idw_interpolate, idw_log};
pub use naive::{NaiveRecovery, naive_arch, naive_unn_recover, unn_budget};
