use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mask::Measurements;
use crate::seed::Seed;

use super::transform::h_transform;

/// Noisy uniform quantizer acting in the log domain. Labels run from 1 to
/// L = 2^B; label ℓ covers (b_{ℓ−1}, b_ℓ] with b_0 = −∞ and b_L = +∞.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizerSpec {
    bits: u32,
    /// Finite boundaries b_1 … b_{L−1}.
    boundaries: Vec<f64>,
    sigma: f64,
    a_offset: f64,
}

impl QuantizerSpec {
    pub fn new(bits: u32, boundaries: Vec<f64>, sigma: f64, a_offset: f64) -> Result<Self> {
        if !(1..=16).contains(&bits) {
            return Err(Error::invalid(format!("bit depth {bits} outside 1..=16")));
        }
        let levels = 1usize << bits;
        if boundaries.len() != levels - 1 {
            return Err(Error::invalid(format!(
                "{bits}-bit quantizer needs {} finite boundaries, got {}",
                levels - 1,
                boundaries.len()
            )));
        }
        if boundaries.iter().any(|b| !b.is_finite()) || boundaries.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::invalid(
                "quantizer boundaries must be finite and strictly increasing",
            ));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "quantizer noise sigma must be > 0, got {sigma}"
            )));
        }
        if !(a_offset > 0.0 && a_offset.is_finite()) {
            return Err(Error::invalid(format!(
                "transform offset must be > 0, got {a_offset}"
            )));
        }
        Ok(Self {
            bits,
            boundaries,
            sigma,
            a_offset,
        })
    }

    /// Uniform partition of [μ − 3s, μ + 3s] (μ, s: mean and std of the
    /// log-domain values) with unbounded outer bins.
    pub fn uniform_for(h_values: &[f64], bits: u32, sigma: f64, a_offset: f64) -> Result<Self> {
        if h_values.is_empty() {
            return Err(Error::invalid("cannot design a quantizer from no values"));
        }
        if !(1..=16).contains(&bits) {
            return Err(Error::invalid(format!("bit depth {bits} outside 1..=16")));
        }
        let n = h_values.len() as f64;
        let mean = h_values.iter().sum::<f64>() / n;
        let std = (h_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        if !(std > 0.0) {
            return Err(Error::invalid("log-domain values have zero spread"));
        }
        let levels = 1usize << bits;
        let boundaries = if levels == 2 {
            vec![mean]
        } else {
            let lo = mean - 3.0 * std;
            let step = 6.0 * std / (levels - 2) as f64;
            (0..levels - 1).map(|m| lo + m as f64 * step).collect()
        };
        Self::new(bits, boundaries, sigma, a_offset)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn levels(&self) -> usize {
        1 << self.bits
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn a_offset(&self) -> f64 {
        self.a_offset
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// b_{ℓ−1}, −∞ for the first bin.
    pub fn lower(&self, label: u32) -> f64 {
        if label <= 1 {
            f64::NEG_INFINITY
        } else {
            self.boundaries[label as usize - 2]
        }
    }

    /// b_ℓ, +∞ for the last bin.
    pub fn upper(&self, label: u32) -> f64 {
        self.boundaries
            .get(label as usize - 1)
            .copied()
            .unwrap_or(f64::INFINITY)
    }

    /// Q(x) = ℓ such that b_{ℓ−1} < x ≤ b_ℓ.
    pub fn label_of(&self, x: f64) -> u32 {
        1 + self.boundaries.partition_point(|&b| b < x) as u32
    }

    /// Point estimate of the log-domain value for a label: the bin midpoint,
    /// or half a bin-width beyond the edge for the unbounded outer bins.
    pub fn representative(&self, label: u32) -> f64 {
        let (lo, hi) = (self.lower(label), self.upper(label));
        let spacing = if self.boundaries.len() > 1 {
            (self.boundaries[self.boundaries.len() - 1] - self.boundaries[0])
                / (self.boundaries.len() - 1) as f64
        } else {
            2.0 * self.sigma
        };
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (false, true) => hi - 0.5 * spacing,
            (true, false) => lo + 0.5 * spacing,
            (false, false) => 0.0,
        }
    }

    pub fn check_label(&self, label: u32) -> Result<()> {
        if label == 0 || label as usize > self.levels() {
            Err(Error::invalid(format!(
                "label {label} outside 1..={}",
                self.levels()
            )))
        } else {
            Ok(())
        }
    }
}

/// Quantized fibers: one label per (location, bin), location-major.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedMeasurements {
    dims: (usize, usize, usize),
    locations: Vec<(usize, usize)>,
    labels: Vec<u32>,
}

impl QuantizedMeasurements {
    pub fn new(
        dims: (usize, usize, usize),
        locations: Vec<(usize, usize)>,
        labels: Vec<u32>,
    ) -> Result<Self> {
        if locations.is_empty() || labels.len() != locations.len() * dims.2 {
            return Err(Error::invalid("labels do not match locations × K"));
        }
        if locations.iter().any(|&(i, j)| i >= dims.0 || j >= dims.1) {
            return Err(Error::invalid("label location outside grid"));
        }
        Ok(Self {
            dims,
            locations,
            labels,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn locations(&self) -> &[(usize, usize)] {
        &self.locations
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// Q(v + noise) for already log-transformed values, noise i.i.d. N(0, σ²).
pub fn quantize_values(h_values: &[f64], spec: &QuantizerSpec, seed: Seed) -> Vec<u32> {
    let mut rng = seed.rng();
    let noise = Normal::new(0.0, spec.sigma).expect("sigma validated");
    h_values
        .iter()
        .map(|&v| spec.label_of(v + noise.sample(&mut rng)))
        .collect()
}

/// Quantize linear-power fibers: Y_q = Q(h(X) + N).
pub fn quantize_fibers(
    measurements: &Measurements,
    spec: &QuantizerSpec,
    seed: Seed,
) -> QuantizedMeasurements {
    let h: Vec<f64> = measurements
        .values()
        .iter()
        .map(|&x| h_transform(x, spec.a_offset))
        .collect();
    let labels = quantize_values(&h, spec, seed);
    QuantizedMeasurements {
        dims: measurements.dims(),
        locations: measurements.locations().to_vec(),
        labels,
    }
}
