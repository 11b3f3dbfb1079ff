use rand::seq::index;

use crate::error::{Error, Result};
use crate::seed::Seed;
use crate::tensor::RadioMapTensor;

/// Set of sensor cells Ω on an I×J grid. Locations are kept sorted so equal
/// sets compare equal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingMask {
    grid: (usize, usize),
    locations: Vec<(usize, usize)>,
}

impl SamplingMask {
    pub fn new(grid: (usize, usize), mut locations: Vec<(usize, usize)>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::invalid(
                "sampling mask must contain at least one location",
            ));
        }
        if let Some(&(i, j)) = locations.iter().find(|&&(i, j)| i >= grid.0 || j >= grid.1) {
            return Err(Error::invalid(format!(
                "mask location ({i}, {j}) outside grid {grid:?}"
            )));
        }
        locations.sort_unstable();
        if locations.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("mask contains duplicate locations"));
        }
        Ok(Self { grid, locations })
    }

    pub fn grid(&self) -> (usize, usize) {
        self.grid
    }

    pub fn locations(&self) -> &[(usize, usize)] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn contains(&self, loc: (usize, usize)) -> bool {
        self.locations.binary_search(&loc).is_ok()
    }
}

/// Number of sensors for a sampling fraction: round(rho·I·J), half away from zero.
pub fn sample_count(rows: usize, cols: usize, rho: f64) -> Result<usize> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::invalid(format!(
            "sampling fraction {rho} outside (0, 1]"
        )));
    }
    Ok((rho * (rows * cols) as f64).round() as usize)
}

/// Draw round(rho·I·J) distinct cells uniformly without replacement.
pub fn mask_sample(rows: usize, cols: usize, rho: f64, seed: Seed) -> Result<SamplingMask> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("grid dims must be positive"));
    }
    let n = sample_count(rows, cols, rho)?;
    if n == 0 {
        return Err(Error::invalid(format!(
            "rho = {rho} selects no cells on a {rows}x{cols} grid"
        )));
    }
    let mut rng = seed.rng();
    let cells = index::sample(&mut rng, rows * cols, n);
    let locations = cells.into_iter().map(|c| (c / cols, c % cols)).collect();
    SamplingMask::new((rows, cols), locations)
}

/// Fibers reported by the sensors, one K-vector per location, in mask order.
/// Values are in whatever domain the producer says (linear power from
/// [`apply_mask`], log power after [`Measurements::map_values`]).
#[derive(Clone, Debug, PartialEq)]
pub struct Measurements {
    dims: (usize, usize, usize),
    locations: Vec<(usize, usize)>,
    values: Vec<f64>,
}

impl Measurements {
    pub fn new(
        dims: (usize, usize, usize),
        locations: Vec<(usize, usize)>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::invalid("measurement set is empty"));
        }
        if values.len() != locations.len() * dims.2 {
            return Err(Error::invalid(format!(
                "{} locations with K = {} need {} values, got {}",
                locations.len(),
                dims.2,
                locations.len() * dims.2,
                values.len()
            )));
        }
        if locations.iter().any(|&(i, j)| i >= dims.0 || j >= dims.1) {
            return Err(Error::invalid("measurement location outside grid"));
        }
        Ok(Self {
            dims,
            locations,
            values,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn bins(&self) -> usize {
        self.dims.2
    }

    pub fn locations(&self) -> &[(usize, usize)] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn fiber(&self, n: usize) -> &[f64] {
        let k = self.dims.2;
        &self.values[n * k..(n + 1) * k]
    }

    pub fn mask(&self) -> Result<SamplingMask> {
        SamplingMask::new((self.dims.0, self.dims.1), self.locations.clone())
    }

    /// Same locations, values passed through `f` (e.g. the log transform).
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            dims: self.dims,
            locations: self.locations.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Collect X(i, j, :) for every (i, j) ∈ Ω.
pub fn apply_mask(x: &RadioMapTensor, mask: &SamplingMask) -> Result<Measurements> {
    let (ni, nj, nk) = x.dims();
    if let Some(&(i, j)) = mask.locations().iter().find(|&&(i, j)| i >= ni || j >= nj) {
        return Err(Error::invalid(format!(
            "mask location ({i}, {j}) outside tensor grid {ni}x{nj}"
        )));
    }
    let mut values = Vec::with_capacity(mask.len() * nk);
    for &(i, j) in mask.locations() {
        values.extend_from_slice(x.fiber(i, j));
    }
    Measurements::new(x.dims(), mask.locations().to_vec(), values)
}
