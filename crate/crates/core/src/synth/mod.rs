//! Ground-truth radio maps and the sensing channel.

mod psd;
mod quantizer;
mod scenario;
mod shadowing;
mod slf;
mod transform;

pub use psd::{PsdBump, PsdRanges, PsdSpec, generate_psd, random_psd_spec};
pub use quantizer::{QuantizedMeasurements, QuantizerSpec, quantize_fibers, quantize_values};
pub use scenario::{
    Observations, QuantizationParams, Scenario, ScenarioParams, SensingParams, generate_scenario,
    observe, sense,
};
pub use shadowing::{ShadowingParams, shadowing_field};
pub use slf::{assemble_map, generate_slf};
pub use transform::{h_inverse, h_transform};
