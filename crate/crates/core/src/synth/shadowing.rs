use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seed::Seed;

/// Shadowing and path-loss parameters for one emitter.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowingParams {
    /// Decorrelation distance in meters (one grid cell is 1 m).
    pub xc: f64,
    /// Shadowing standard deviation in dB.
    pub eta: f64,
    pub path_loss_exponent: f64,
    pub emitter: (usize, usize),
}

impl ShadowingParams {
    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if !(self.xc > 0.0 && self.xc.is_finite()) {
            return Err(Error::invalid(format!(
                "decorrelation distance must be > 0, got {}",
                self.xc
            )));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!(
                "shadowing std must be >= 0, got {}",
                self.eta
            )));
        }
        if !(self.path_loss_exponent > 0.0 && self.path_loss_exponent.is_finite()) {
            return Err(Error::invalid("path-loss exponent must be > 0"));
        }
        if self.emitter.0 >= rows || self.emitter.1 >= cols {
            return Err(Error::invalid(format!(
                "emitter {:?} outside {rows}x{cols} grid",
                self.emitter
            )));
        }
        Ok(())
    }
}

type FactorKey = (usize, usize, u64);

fn factor_cache() -> &'static Mutex<HashMap<FactorKey, Arc<DMatrix<f64>>>> {
    static CACHE: OnceLock<Mutex<HashMap<FactorKey, Arc<DMatrix<f64>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Lower Cholesky factor of the unit-variance correlation exp(-‖p−q‖/xc) over
/// the row-major grid. It depends only on (rows, cols, xc), so it is computed
/// once per process and shared.
fn correlation_factor(rows: usize, cols: usize, xc: f64) -> Arc<DMatrix<f64>> {
    let key = (rows, cols, xc.to_bits());
    let mut cache = factor_cache().lock().unwrap_or_else(|e| e.into_inner());
    if let Some(f) = cache.get(&key) {
        return Arc::clone(f);
    }
    let n = rows * cols;
    let corr = DMatrix::from_fn(n, n, |a, b| {
        let di = (a / cols) as f64 - (b / cols) as f64;
        let dj = (a % cols) as f64 - (b % cols) as f64;
        (-(di * di + dj * dj).sqrt() / xc).exp()
    });
    let mut nugget = 0.0;
    let factor = loop {
        let mut m = corr.clone();
        for d in 0..n {
            m[(d, d)] += nugget;
        }
        if let Some(ch) = m.cholesky() {
            break ch.unpack();
        }
        // exp kernel is positive definite; this only guards round-off.
        nugget = if nugget == 0.0 { 1e-12 } else { nugget * 10.0 };
    };
    let factor = Arc::new(factor);
    cache.insert(key, Arc::clone(&factor));
    factor
}

/// Zero-mean Gaussian field in dB with covariance η²·exp(−‖p−q‖₂/X_c),
/// row-major I×J. Sampled exactly through the Cholesky factor.
pub fn shadowing_field(
    rows: usize,
    cols: usize,
    params: &ShadowingParams,
    seed: Seed,
) -> Result<Vec<f64>> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("grid dims must be positive"));
    }
    params.validate(rows, cols)?;
    let n = rows * cols;
    if params.eta == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut rng = seed.rng();
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let factor = correlation_factor(rows, cols, params.xc);
    let lower = factor.as_slice();
    let mut field = vec![0.0; n];
    for (col, w) in white.iter().enumerate() {
        let column = &lower[col * n..(col + 1) * n];
        for (f, l) in field[col..].iter_mut().zip(&column[col..]) {
            *f += l * w;
        }
    }
    field.iter_mut().for_each(|v| *v *= params.eta);
    Ok(field)
}
