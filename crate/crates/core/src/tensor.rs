use crate::error::{Error, Result};

fn check_nonnegative(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !(*v >= 0.0)) {
        Some(index) => Err(Error::NegativeEntry {
            index,
            value: data[index],
        }),
        None => Ok(()),
    }
}

/// Dense I×J×K power map, row-major with the frequency index fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct RadioMapTensor {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl RadioMapTensor {
    pub fn new(dims: (usize, usize, usize), data: Vec<f64>) -> Result<Self> {
        let (i, j, k) = dims;
        if i == 0 || j == 0 || k == 0 {
            return Err(Error::invalid(format!(
                "tensor dims must be positive, got {dims:?}"
            )));
        }
        if data.len() != i * j * k {
            return Err(Error::invalid(format!(
                "tensor of dims {dims:?} needs {} values, got {}",
                i * j * k,
                data.len()
            )));
        }
        check_nonnegative(&data)?;
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Result<Self> {
        Self::new(dims, vec![0.0; dims.0 * dims.1 * dims.2])
    }

    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.0 * dims.1 * dims.2);
        for i in 0..dims.0 {
            for j in 0..dims.1 {
                for k in 0..dims.2 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::new(dims, data)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let (_, nj, nk) = self.dims;
        self.data[(i * nj + j) * nk + k]
    }

    /// Spectral fiber X(i, j, :).
    pub fn fiber(&self, i: usize, j: usize) -> &[f64] {
        let (_, nj, nk) = self.dims;
        let start = (i * nj + j) * nk;
        &self.data[start..start + nk]
    }

    /// Spatial slab X(:, :, k), row-major I×J.
    pub fn band(&self, k: usize) -> Vec<f64> {
        let nk = self.dims.2;
        self.data.iter().skip(k).step_by(nk).copied().collect()
    }
}

/// Spatial loss field of one emitter, I×J row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SlfMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl SlfMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "SLF of {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        check_nonnegative(&data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// PSD columns `[c_1 … c_R]`, K×R. Columns are stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdMatrix {
    bins: usize,
    emitters: usize,
    data: Vec<f64>,
}

impl PsdMatrix {
    /// Build from emitter-major storage: `data[r * K + k] = C(k, r)`.
    pub fn from_columns_flat(bins: usize, emitters: usize, data: Vec<f64>) -> Result<Self> {
        if bins == 0 || emitters == 0 || data.len() != bins * emitters {
            return Err(Error::invalid(format!(
                "PSD matrix {bins}x{emitters} needs {} values, got {}",
                bins * emitters,
                data.len()
            )));
        }
        check_nonnegative(&data)?;
        Ok(Self {
            bins,
            emitters,
            data,
        })
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let bins = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != bins) {
            return Err(Error::invalid("PSD columns have unequal lengths"));
        }
        Self::from_columns_flat(bins, columns.len(), columns.concat())
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn emitters(&self) -> usize {
        self.emitters
    }

    pub fn get(&self, k: usize, r: usize) -> f64 {
        self.data[r * self.bins + k]
    }

    pub fn column(&self, r: usize) -> &[f64] {
        &self.data[r * self.bins..(r + 1) * self.bins]
    }

    /// Emitter-major flat storage.
    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}
