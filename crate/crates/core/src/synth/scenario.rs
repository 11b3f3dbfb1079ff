use rand::seq::index;

use crate::error::{Error, Result};
use crate::mask::{Measurements, SamplingMask, apply_mask, mask_sample};
use crate::seed::Seed;
use crate::tensor::{PsdMatrix, RadioMapTensor, SlfMatrix};

use super::psd::{PsdRanges, generate_psd, random_psd_spec};
use super::quantizer::{QuantizedMeasurements, QuantizerSpec, quantize_fibers};
use super::shadowing::ShadowingParams;
use super::slf::{assemble_map, generate_slf};
use super::transform::h_transform;

/// Everything needed to draw one ground-truth map.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioParams {
    pub rows: usize,
    pub cols: usize,
    pub bins: usize,
    pub emitters: usize,
    pub xc: f64,
    pub eta: f64,
    pub path_loss_exponent: f64,
    pub psd: PsdRanges,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            rows: 64,
            cols: 64,
            bins: 64,
            emitters: 4,
            xc: 90.0,
            eta: 6.0,
            path_loss_exponent: 2.0,
            psd: PsdRanges::default(),
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.bins == 0 {
            return Err(Error::invalid("I, J, K must be positive"));
        }
        if self.emitters == 0 || self.emitters > self.rows * self.cols {
            return Err(Error::invalid(format!(
                "R = {} out of range",
                self.emitters
            )));
        }
        self.psd.validate()?;
        ShadowingParams {
            xc: self.xc,
            eta: self.eta,
            path_loss_exponent: self.path_loss_exponent,
            emitter: (0, 0),
        }
        .validate(self.rows, self.cols)
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub emitters: Vec<(usize, usize)>,
    pub slfs: Vec<SlfMatrix>,
    pub psd: PsdMatrix,
    pub map: RadioMapTensor,
}

/// Emitters at distinct uniformly drawn cells, independent shadowing per
/// emitter, random Gaussian-mixture PSDs.
pub fn generate_scenario(params: &ScenarioParams, seed: Seed) -> Result<Scenario> {
    params.validate()?;
    let cols = params.cols;
    let mut rng = seed.derive("emitters").rng();
    let emitters: Vec<(usize, usize)> =
        index::sample(&mut rng, params.rows * cols, params.emitters)
            .into_iter()
            .map(|c| (c / cols, c % cols))
            .collect();
    let mut slfs = Vec::with_capacity(params.emitters);
    let mut columns = Vec::with_capacity(params.emitters);
    for (r, &emitter) in emitters.iter().enumerate() {
        let shadowing = ShadowingParams {
            xc: params.xc,
            eta: params.eta,
            path_loss_exponent: params.path_loss_exponent,
            emitter,
        };
        let r = r as u64;
        slfs.push(generate_slf(
            params.rows,
            cols,
            &shadowing,
            seed.derive("shadowing").derive_index(r),
        )?);
        let spec = random_psd_spec(params.bins, &params.psd, seed.derive("psd").derive_index(r))?;
        columns.push(generate_psd(params.bins, &spec)?);
    }
    let psd = PsdMatrix::from_columns(&columns)?;
    let map = assemble_map(&slfs, &psd)?;
    Ok(Scenario {
        emitters,
        slfs,
        psd,
        map,
    })
}

/// How the sensors report.
#[derive(Clone, Debug, PartialEq)]
pub struct SensingParams {
    pub rho: f64,
    pub a_offset: f64,
    /// `None` for full-precision reports.
    pub quantization: Option<QuantizationParams>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantizationParams {
    pub bits: u32,
    pub sigma: f64,
}

impl Default for SensingParams {
    fn default() -> Self {
        Self {
            rho: 0.10,
            a_offset: 1e-3,
            quantization: None,
        }
    }
}

/// Data delivered to the fusion center.
#[derive(Clone, Debug)]
pub enum Observations {
    /// Log-domain fibers h(X(i, j, :)).
    Full { values: Measurements, a_offset: f64 },
    Quantized {
        labels: QuantizedMeasurements,
        spec: QuantizerSpec,
    },
}

impl Observations {
    pub fn dims(&self) -> (usize, usize, usize) {
        match self {
            Observations::Full { values, .. } => values.dims(),
            Observations::Quantized { labels, .. } => labels.dims(),
        }
    }

    pub fn locations(&self) -> &[(usize, usize)] {
        match self {
            Observations::Full { values, .. } => values.locations(),
            Observations::Quantized { labels, .. } => labels.locations(),
        }
    }

    pub fn a_offset(&self) -> f64 {
        match self {
            Observations::Full { a_offset, .. } => *a_offset,
            Observations::Quantized { spec, .. } => spec.a_offset(),
        }
    }

    pub fn is_quantized(&self) -> bool {
        matches!(self, Observations::Quantized { .. })
    }

    /// Log-domain point estimates: the values themselves, or the bin
    /// representatives of the labels.
    pub fn log_estimates(&self) -> Measurements {
        match self {
            Observations::Full { values, .. } => values.clone(),
            Observations::Quantized { labels, spec } => Measurements::new(
                labels.dims(),
                labels.locations().to_vec(),
                labels
                    .labels()
                    .iter()
                    .map(|&l| spec.representative(l))
                    .collect(),
            )
            .expect("labels are shape-consistent"),
        }
    }
}

/// Draw the sensor set and produce what the sensors transmit.
pub fn sense(
    map: &RadioMapTensor,
    params: &SensingParams,
    seed: Seed,
) -> Result<(SamplingMask, Observations)> {
    let (rows, cols, _) = map.dims();
    let mask = mask_sample(rows, cols, params.rho, seed.derive("mask"))?;
    let obs = observe(map, &mask, params, seed)?;
    Ok((mask, obs))
}

/// Sensor reports for a given mask.
pub fn observe(
    map: &RadioMapTensor,
    mask: &SamplingMask,
    params: &SensingParams,
    seed: Seed,
) -> Result<Observations> {
    let linear = apply_mask(map, mask)?;
    let a = params.a_offset;
    let h = linear.map_values(|x| h_transform(x, a));
    Ok(match params.quantization {
        None => Observations::Full {
            values: h,
            a_offset: a,
        },
        Some(q) => {
            let spec = QuantizerSpec::uniform_for(h.values(), q.bits, q.sigma, a)?;
            let labels = quantize_fibers(&linear, &spec, seed.derive("quantizer-noise"));
            Observations::Quantized { labels, spec }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioParams {
        ScenarioParams {
            rows: 12,
            cols: 12,
            bins: 16,
            emitters: 3,
            xc: 8.0,
            ..Default::default()
        }
    }

    #[test]
    fn scenario_shapes_and_determinism() {
        let p = small();
        let a = generate_scenario(&p, Seed(5)).unwrap();
        let b = generate_scenario(&p, Seed(5)).unwrap();
        assert_eq!(a.map, b.map);
        assert_eq!(a.map.dims(), (12, 12, 16));
        assert_eq!(a.slfs.len(), 3);
        assert_eq!(a.psd.emitters(), 3);
        let mut e = a.emitters.clone();
        e.sort();
        e.dedup();
        assert_eq!(e.len(), 3);
    }

    #[test]
    fn sensing_full_and_quantized() {
        let s = generate_scenario(&small(), Seed(1)).unwrap();
        let params = SensingParams {
            rho: 0.25,
            ..Default::default()
        };
        let (mask, obs) = sense(&s.map, &params, Seed(2)).unwrap();
        assert_eq!(mask.len(), 36);
        assert!(!obs.is_quantized());
        let qp = SensingParams {
            quantization: Some(QuantizationParams {
                bits: 3,
                sigma: 0.1,
            }),
            ..params
        };
        let (mask_q, obs_q) = sense(&s.map, &qp, Seed(2)).unwrap();
        assert_eq!(mask, mask_q);
        match obs_q {
            Observations::Quantized { labels, spec } => {
                assert_eq!(spec.levels(), 8);
                assert!(labels.labels().iter().all(|&l| (1..=8).contains(&l)));
            }
            _ => panic!("expected quantized"),
        }
    }
}
