use crate::error::{Error, Result};
use crate::mask::Measurements;
use crate::synth::h_inverse;
use crate::tensor::RadioMapTensor;

/// Inverse-distance-weighted interpolation of log-domain fibers, returned as
/// an I×J×K grid still in the log domain (k fastest).
pub fn idw_log(measurements: &Measurements, power: f64) -> Result<Vec<f64>> {
    if measurements.is_empty() {
        return Err(Error::invalid("IDW needs at least one sensor"));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::invalid(format!(
            "IDW power must be > 0, got {power}"
        )));
    }
    let (rows, cols, bins) = measurements.dims();
    // a fixed sensor order makes the weighted sums independent of input order
    let mut order: Vec<usize> = (0..measurements.len()).collect();
    order.sort_by_key(|&n| measurements.locations()[n]);
    let mut out = vec![0.0; rows * cols * bins];
    let mut weights = vec![0.0; order.len()];
    for i in 0..rows {
        for j in 0..cols {
            let dst = &mut out[(i * cols + j) * bins..(i * cols + j + 1) * bins];
            let hit = order
                .iter()
                .find(|&&n| measurements.locations()[n] == (i, j));
            if let Some(&n) = hit {
                dst.copy_from_slice(measurements.fiber(n));
                continue;
            }
            let mut total = 0.0;
            for (w, &n) in weights.iter_mut().zip(&order) {
                let (si, sj) = measurements.locations()[n];
                let d2 = (si as f64 - i as f64).powi(2) + (sj as f64 - j as f64).powi(2);
                *w = d2.powf(-0.5 * power);
                total += *w;
            }
            for (&w, &n) in weights.iter().zip(&order) {
                let scale = w / total;
                for (d, y) in dst.iter_mut().zip(measurements.fiber(n)) {
                    *d += scale * y;
                }
            }
        }
    }
    Ok(out)
}

/// IDW in the h-domain, mapped back to linear power with h⁻¹.
pub fn idw_interpolate(
    measurements: &Measurements,
    power: f64,
    a_offset: f64,
) -> Result<RadioMapTensor> {
    let log = idw_log(measurements, power)?;
    RadioMapTensor::new(
        measurements.dims(),
        log.into_iter().map(|y| h_inverse(y, a_offset)).collect(),
    )
}
