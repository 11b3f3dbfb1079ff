use crate::error::{Error, Result};
use crate::synth::h_transform;
use crate::tensor::RadioMapTensor;

/// Gaussian-window SSIM settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

/// Normalized 1-D Gaussian taps; the window shrinks to the largest odd size
/// that fits the image.
fn taps(params: &SsimParams, rows: usize, cols: usize) -> Vec<f64> {
    let mut w = params.window.min(rows).min(cols);
    if w.is_multiple_of(2) {
        w -= 1;
    }
    let half = (w / 2) as f64;
    let raw: Vec<f64> = (0..w)
        .map(|i| (-(i as f64 - half).powi(2) / (2.0 * params.sigma * params.sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable valid-mode filtering of a row-major image.
fn filter(img: &[f64], rows: usize, cols: usize, taps: &[f64]) -> Vec<f64> {
    let w = taps.len();
    let (orows, ocols) = (rows + 1 - w, cols + 1 - w);
    let mut horiz = vec![0.0; rows * ocols];
    for i in 0..rows {
        for j in 0..ocols {
            horiz[i * ocols + j] = taps
                .iter()
                .enumerate()
                .map(|(t, g)| g * img[i * cols + j + t])
                .sum();
        }
    }
    let mut out = vec![0.0; orows * ocols];
    for i in 0..orows {
        for j in 0..ocols {
            out[i * ocols + j] = taps
                .iter()
                .enumerate()
                .map(|(t, g)| g * horiz[(i + t) * ocols + j])
                .sum();
        }
    }
    out
}

/// Mean SSIM over all fully-contained windows of two `rows × cols` images.
pub fn ssim_band(
    a: &[f64],
    b: &[f64],
    rows: usize,
    cols: usize,
    params: &SsimParams,
    dynamic_range: f64,
) -> Result<f64> {
    if a.len() != rows * cols || b.len() != rows * cols {
        return Err(Error::invalid(format!(
            "SSIM inputs have {} and {} entries, expected {rows}x{cols}",
            a.len(),
            b.len()
        )));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("SSIM of an empty image"));
    }
    if !(dynamic_range > 0.0) {
        return Err(Error::invalid(format!(
            "dynamic range must be > 0, got {dynamic_range}"
        )));
    }
    let g = taps(params, rows, cols);
    let c1 = (params.k1 * dynamic_range).powi(2);
    let c2 = (params.k2 * dynamic_range).powi(2);
    let prod = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).collect::<Vec<f64>>();
    let mu_a = filter(a, rows, cols, &g);
    let mu_b = filter(b, rows, cols, &g);
    let aa = filter(&prod(a, a), rows, cols, &g);
    let bb = filter(&prod(b, b), rows, cols, &g);
    let ab = filter(&prod(a, b), rows, cols, &g);
    let n = mu_a.len() as f64;
    let total: f64 = (0..mu_a.len())
        .map(|p| {
            let (ma, mb) = (mu_a[p], mu_b[p]);
            let va = aa[p] - ma * ma;
            let vb = bb[p] - mb * mb;
            let cov = ab[p] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / n)
}

/// Band-averaged SSIM between ln(X + a) and ln(X̂ + a), with the dynamic
/// range taken from the ground-truth log map (1 if that map is constant).
pub fn ssim_log_avg(
    truth: &RadioMapTensor,
    estimate: &RadioMapTensor,
    a_offset: f64,
) -> Result<f64> {
    if truth.dims() != estimate.dims() {
        return Err(Error::invalid(format!(
            "tensor dims differ: {:?} vs {:?}",
            truth.dims(),
            estimate.dims()
        )));
    }
    let (rows, cols, bins) = truth.dims();
    let log = |x: &RadioMapTensor, k: usize| {
        x.band(k)
            .into_iter()
            .map(|v| h_transform(v, a_offset))
            .collect::<Vec<f64>>()
    };
    let (lo, hi) = truth
        .data()
        .iter()
        .map(|&v| h_transform(v, a_offset))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let range = if hi > lo { hi - lo } else { 1.0 };
    let params = SsimParams::default();
    let mut total = 0.0;
    for k in 0..bins {
        total += ssim_band(
            &log(truth, k),
            &log(estimate, k),
            rows,
            cols,
            &params,
            range,
        )?;
    }
    Ok(total / bins as f64)
}

/// ‖X − X̂‖²_F / ‖X‖²_F.
pub fn nmse(truth: &RadioMapTensor, estimate: &RadioMapTensor) -> Result<f64> {
    if truth.dims() != estimate.dims() {
        return Err(Error::invalid(format!(
            "tensor dims differ: {:?} vs {:?}",
            truth.dims(),
            estimate.dims()
        )));
    }
    let energy: f64 = truth.data().iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return Err(Error::invalid("NMSE against an all-zero ground truth"));
    }
    let err: f64 = truth
        .data()
        .iter()
        .zip(estimate.data())
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    Ok(err / energy)
}
