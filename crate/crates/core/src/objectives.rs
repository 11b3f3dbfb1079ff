//! Recovery objectives: the masked log-domain squared error and the quantized
//! negative log-likelihood, each with squared-norm regularizers and exact
//! gradients with respect to (θ, Z, C).

use std::f64::consts::FRAC_1_SQRT_2;

use crate::decoder::{DecoderArch, DecoderParams, Gradients, LatentCodes, decode, decode_backward};
use crate::error::{Error, Result};
use crate::mask::Measurements;
use crate::synth::{Observations, QuantizedMeasurements, QuantizerSpec, h_transform};
use crate::tensor::PsdMatrix;

/// Weights of λ1‖Z‖²_F, λ2‖C‖²_F and λ3‖θ‖².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for RegWeights {
    fn default() -> Self {
        Self {
            lambda1: 1e-3,
            lambda2: 1e-3,
            lambda3: 1e-4,
        }
    }
}

impl RegWeights {
    pub const ZERO: RegWeights = RegWeights {
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if [self.lambda1, self.lambda2, self.lambda3]
            .iter()
            .all(|l| *l >= 0.0 && l.is_finite())
        {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "regularization weights must be >= 0: {self:?}"
            )))
        }
    }
}

const LN_2PI_HALF: f64 = 0.918_938_533_204_672_8;
const PROB_FLOOR: f64 = 1e-300;

/// ln φ(x) for the standard normal density.
fn log_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        f64::NEG_INFINITY
    } else {
        -0.5 * x * x - LN_2PI_HALF
    }
}

/// ln Q(x) = ln P(N(0,1) > x), accurate far into both tails.
pub fn log_upper_tail(x: f64) -> f64 {
    if x == f64::INFINITY {
        f64::NEG_INFINITY
    } else if x == f64::NEG_INFINITY {
        0.0
    } else if x < 30.0 {
        (0.5 * libm::erfc(x * FRAC_1_SQRT_2)).ln()
    } else {
        // asymptotic series of the Mills ratio; error below 1e-12 for x ≥ 30
        let t = 1.0 / (x * x);
        let series = 1.0 - t * (1.0 - 3.0 * t * (1.0 - 5.0 * t * (1.0 - 7.0 * t)));
        -0.5 * x * x - x.ln() - LN_2PI_HALF + series.ln()
    }
}

/// ln(e^a − e^b) for a > b.
fn log_diff(a: f64, b: f64) -> f64 {
    a + (-(b - a).exp()).ln_1p()
}

/// −ln P(lower < v + N(0, σ²) ≤ upper) and its derivative in v.
pub fn bin_nll(v: f64, lower: f64, upper: f64, sigma: f64) -> (f64, f64) {
    let l = (lower - v) / sigma;
    let u = (upper - v) / sigma;
    let log_p = if l >= 0.0 {
        log_diff(log_upper_tail(l), log_upper_tail(u))
    } else if u <= 0.0 {
        log_diff(log_upper_tail(-u), log_upper_tail(-l))
    } else {
        (-(log_upper_tail(u).exp() + log_upper_tail(-l).exp())).ln_1p()
    };
    let log_p = if log_p.is_finite() {
        log_p
    } else {
        PROB_FLOOR.ln()
    };
    // dp/dv = −(φ(u) − φ(l))/σ
    let grad = ((log_pdf(u) - log_p).exp() - (log_pdf(l) - log_p).exp()) / sigma;
    (-log_p, grad)
}

/// The data-fidelity part of an objective, evaluated entry by entry on the
/// linear-power model value at an observed (location, bin).
#[derive(Clone, Copy, Debug)]
pub enum DataTerm<'a> {
    /// (y − ln(x + a))² with y already log-domain.
    Squared { values: &'a [f64], a_offset: f64 },
    /// −ln P(label | ln(x + a)).
    Quantized {
        labels: &'a [u32],
        spec: &'a QuantizerSpec,
    },
}

impl<'a> DataTerm<'a> {
    pub fn from_observations(obs: &'a Observations) -> Self {
        match obs {
            Observations::Full { values, a_offset } => DataTerm::Squared {
                values: values.values(),
                a_offset: *a_offset,
            },
            Observations::Quantized { labels, spec } => DataTerm::Quantized {
                labels: labels.labels(),
                spec,
            },
        }
    }

    pub fn len(&self) -> usize {
        match self {
            DataTerm::Squared { values, .. } => values.len(),
            DataTerm::Quantized { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if let DataTerm::Quantized { labels, spec } = self {
            for &l in labels.iter() {
                spec.check_label(l)?;
            }
        }
        Ok(())
    }

    /// Loss of entry `idx` at model value `x ≥ 0`, and d loss / d x.
    #[inline]
    pub fn entry(&self, idx: usize, x: f64) -> (f64, f64) {
        match self {
            DataTerm::Squared { values, a_offset } => {
                let resid = values[idx] - h_transform(x, *a_offset);
                (resid * resid, -2.0 * resid / (x + a_offset))
            }
            DataTerm::Quantized { labels, spec } => {
                let label = labels[idx];
                let a = spec.a_offset();
                let (nll, dv) = bin_nll(
                    h_transform(x, a),
                    spec.lower(label),
                    spec.upper(label),
                    spec.sigma(),
                );
                (nll, dv / (x + a))
            }
        }
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Add λ‖v‖² to the loss and 2λv to the gradient.
fn add_ridge(loss: &mut f64, grad: &mut [f64], values: &[f64], lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    *loss += lambda * sq_norm(values);
    for (g, v) in grad.iter_mut().zip(values) {
        *g += 2.0 * lambda * v;
    }
}

/// Data term over the observed fibers of Σ_r G_θ(z_r) ∘ c_r, plus the
/// regularizers. Shared by both public objectives.
pub fn factored_objective(
    params: &DecoderParams,
    latents: &LatentCodes,
    psd: &PsdMatrix,
    arch: &DecoderArch,
    locations: &[(usize, usize)],
    data: DataTerm<'_>,
    reg: &RegWeights,
) -> Result<(f64, Gradients)> {
    reg.validate()?;
    let side = arch.output_side();
    let bins = psd.bins();
    let emitters = psd.emitters();
    if latents.emitters() != emitters || latents.code_len() != arch.latent_len() {
        return Err(Error::invalid(
            "latent codes do not match the PSD columns or the arch",
        ));
    }
    if arch.out_channels() != 1 {
        return Err(Error::invalid(
            "factored objective needs a single-output decoder",
        ));
    }
    if data.len() != locations.len() * bins {
        return Err(Error::invalid(format!(
            "{} observed entries for {} locations × {bins} bins",
            data.len(),
            locations.len()
        )));
    }
    if locations.iter().any(|&(i, j)| i >= side || j >= side) {
        return Err(Error::invalid(format!(
            "observed location outside the {side}x{side} decoder output"
        )));
    }

    let traces = (0..emitters)
        .map(|r| decode(arch, params, latents.code(r)))
        .collect::<Result<Vec<_>>>()?;
    let mut grads = Gradients::zeros(params.len(), latents.as_flat().len(), psd.as_flat().len());
    let mut grad_slf = vec![vec![0.0; side * side]; emitters];
    let mut loss = 0.0;
    let mut s = vec![0.0; emitters];
    for (n, &(i, j)) in locations.iter().enumerate() {
        let cell = i * side + j;
        for (r, t) in traces.iter().enumerate() {
            s[r] = t.output[cell];
        }
        for k in 0..bins {
            let x: f64 = (0..emitters).map(|r| s[r] * psd.get(k, r)).sum();
            let (l, dx) = data.entry(n * bins + k, x);
            loss += l;
            for r in 0..emitters {
                grad_slf[r][cell] += dx * psd.get(k, r);
                grads.psd[r * bins + k] += dx * s[r];
            }
        }
    }
    let code_len = arch.latent_len();
    for (r, trace) in traces.iter().enumerate() {
        let gz = decode_backward(arch, params, trace, &grad_slf[r], &mut grads.theta);
        grads.latents[r * code_len..(r + 1) * code_len].copy_from_slice(&gz);
    }
    add_ridge(
        &mut loss,
        &mut grads.latents,
        latents.as_flat(),
        reg.lambda1,
    );
    add_ridge(&mut loss, &mut grads.psd, psd.as_flat(), reg.lambda2);
    add_ridge(&mut loss, &mut grads.theta, params.values(), reg.lambda3);
    Ok((loss, grads))
}

/// ‖M ⊛ (Y − h(Σ_r G_θ(z_r) ∘ c_r))‖²_F + regularizers. `measurements` hold
/// log-domain fibers.
pub fn fp_loss(
    params: &DecoderParams,
    latents: &LatentCodes,
    psd: &PsdMatrix,
    arch: &DecoderArch,
    measurements: &Measurements,
    a_offset: f64,
    reg: &RegWeights,
) -> Result<(f64, Gradients)> {
    if measurements.bins() != psd.bins() {
        return Err(Error::invalid(
            "measurement fibers and PSD columns differ in K",
        ));
    }
    let data = DataTerm::Squared {
        values: measurements.values(),
        a_offset,
    };
    factored_objective(
        params,
        latents,
        psd,
        arch,
        measurements.locations(),
        data,
        reg,
    )
}

/// Quantized-measurement negative log-likelihood + regularizers.
pub fn quant_nll(
    params: &DecoderParams,
    latents: &LatentCodes,
    psd: &PsdMatrix,
    arch: &DecoderArch,
    labels: &QuantizedMeasurements,
    spec: &QuantizerSpec,
    reg: &RegWeights,
) -> Result<(f64, Gradients)> {
    if labels.dims().2 != psd.bins() {
        return Err(Error::invalid("label fibers and PSD columns differ in K"));
    }
    let data = DataTerm::Quantized {
        labels: labels.labels(),
        spec,
    };
    data.validate()?;
    factored_objective(params, latents, psd, arch, labels.locations(), data, reg)
}

/// Dispatch on the observation kind.
pub fn objective(
    params: &DecoderParams,
    latents: &LatentCodes,
    psd: &PsdMatrix,
    arch: &DecoderArch,
    obs: &Observations,
    reg: &RegWeights,
) -> Result<(f64, Gradients)> {
    match obs {
        Observations::Full { values, a_offset } => {
            fp_loss(params, latents, psd, arch, values, *a_offset, reg)
        }
        Observations::Quantized { labels, spec } => {
            quant_nll(params, latents, psd, arch, labels, spec, reg)
        }
    }
}
