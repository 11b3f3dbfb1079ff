use crate::error::{Error, Result};
use crate::synth::assemble_map;
use crate::tensor::{PsdMatrix, RadioMapTensor, SlfMatrix};

use super::arch::DecoderArch;
use super::ops::{
    NormCache, channel_norm, channel_norm_backward, conv_same, conv_same_backward, sigmoid,
    upsample2x, upsample2x_backward,
};
use super::params::{DecoderParams, LatentCodes};

struct BlockCache {
    side_in: usize,
    upsampled: Vec<f64>,
    /// Convolution output before the ReLU.
    pre: Vec<f64>,
    norm: NormCache,
}

/// Intermediate values of one decoder evaluation, kept for the backward pass.
pub struct DecoderTrace {
    blocks: Vec<BlockCache>,
    features: Vec<f64>,
    /// Sigmoid outputs, `out_channels × D_L × D_L`.
    pub output: Vec<f64>,
}

/// Evaluate G_θ(z): per up-block Cn(ReLU(conv(upsample(·)))), then a 1×1
/// convolution and Sigmoid.
pub fn decode(arch: &DecoderArch, params: &DecoderParams, z: &[f64]) -> Result<DecoderTrace> {
    params.check_arch(arch)?;
    if z.len() != arch.latent_len() {
        return Err(Error::invalid(format!(
            "latent code has {} entries, arch expects {}",
            z.len(),
            arch.latent_len()
        )));
    }
    let theta = params.values();
    let layout = params.layout();
    let mut x = z.to_vec();
    let mut side = arch.latent_side;
    let mut blocks = Vec::with_capacity(arch.n_blocks());
    for (b, bl) in layout.blocks.iter().enumerate() {
        let (c_in, c_out) = (arch.widths[b], arch.widths[b + 1]);
        let up = upsample2x(&x, c_in, side);
        let side_in = side;
        side *= 2;
        let pre = conv_same(
            &up,
            c_in,
            c_out,
            side,
            &theta[bl.kernel.clone()],
            arch.kernel,
        );
        let relu: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
        let (out, norm) = channel_norm(
            &relu,
            c_out,
            &theta[bl.scale.clone()],
            &theta[bl.shift.clone()],
            arch.norm_epsilon,
        );
        blocks.push(BlockCache {
            side_in,
            upsampled: up,
            pre,
            norm,
        });
        x = out;
    }
    let l = arch.n_blocks();
    let (c_last, c_out) = (arch.widths[l], arch.widths[l + 1]);
    let hw = side * side;
    let head = &theta[layout.head.clone()];
    let mut output = vec![0.0; c_out * hw];
    for o in 0..c_out {
        let dst = &mut output[o * hw..(o + 1) * hw];
        for c in 0..c_last {
            let w = head[c * c_out + o];
            for (d, s) in dst.iter_mut().zip(&x[c * hw..(c + 1) * hw]) {
                *d += w * s;
            }
        }
        dst.iter_mut().for_each(|v| *v = sigmoid(*v));
    }
    Ok(DecoderTrace {
        blocks,
        features: x,
        output,
    })
}

/// Vector-Jacobian product of [`decode`]. `grad_output` is the adjoint of the
/// Sigmoid outputs; parameter gradients are accumulated into `grad_params`
/// and the latent gradient is returned.
pub fn decode_backward(
    arch: &DecoderArch,
    params: &DecoderParams,
    trace: &DecoderTrace,
    grad_output: &[f64],
    grad_params: &mut [f64],
) -> Vec<f64> {
    let theta = params.values();
    let layout = params.layout();
    let l = arch.n_blocks();
    let (c_last, c_out) = (arch.widths[l], arch.widths[l + 1]);
    let side = arch.output_side();
    let hw = side * side;
    let head = &theta[layout.head.clone()];

    let dpre: Vec<f64> = grad_output
        .iter()
        .zip(&trace.output)
        .map(|(g, s)| g * s * (1.0 - s))
        .collect();
    let mut grad = vec![0.0; c_last * hw];
    for o in 0..c_out {
        let dp = &dpre[o * hw..(o + 1) * hw];
        for c in 0..c_last {
            let feat = &trace.features[c * hw..(c + 1) * hw];
            grad_params[layout.head.start + c * c_out + o] +=
                dp.iter().zip(feat).map(|(a, b)| a * b).sum::<f64>();
            let w = head[c * c_out + o];
            for (g, d) in grad[c * hw..(c + 1) * hw].iter_mut().zip(dp) {
                *g += w * d;
            }
        }
    }

    for (b, bl) in layout.blocks.iter().enumerate().rev() {
        let cache = &trace.blocks[b];
        let (c_in, c_out) = (arch.widths[b], arch.widths[b + 1]);
        let (g_relu, g_scale, g_shift) = channel_norm_backward(
            &grad,
            &cache.norm,
            c_out,
            &theta[bl.scale.clone()],
            arch.norm_epsilon,
        );
        for (dst, v) in grad_params[bl.scale.clone()].iter_mut().zip(&g_scale) {
            *dst += v;
        }
        for (dst, v) in grad_params[bl.shift.clone()].iter_mut().zip(&g_shift) {
            *dst += v;
        }
        let g_pre: Vec<f64> = g_relu
            .iter()
            .zip(&cache.pre)
            .map(|(g, p)| if *p > 0.0 { *g } else { 0.0 })
            .collect();
        let (g_up, g_w) = conv_same_backward(
            &cache.upsampled,
            &g_pre,
            c_in,
            c_out,
            2 * cache.side_in,
            &theta[bl.kernel.clone()],
            arch.kernel,
        );
        for (dst, v) in grad_params[bl.kernel.clone()].iter_mut().zip(&g_w) {
            *dst += v;
        }
        grad = upsample2x_backward(&g_up, c_in, cache.side_in);
    }
    grad
}

fn single_output(arch: &DecoderArch) -> Result<()> {
    if arch.out_channels() != 1 {
        return Err(Error::invalid(format!(
            "SLF decoder needs one output channel, arch has {}",
            arch.out_channels()
        )));
    }
    Ok(())
}

/// S = mat(Sigmoid(…)): one spatial loss field from one latent code.
pub fn forward(params: &DecoderParams, z: &[f64], arch: &DecoderArch) -> Result<SlfMatrix> {
    single_output(arch)?;
    let side = arch.output_side();
    SlfMatrix::new(side, side, decode(arch, params, z)?.output)
}

fn check_factors(latents: &LatentCodes, psd: &PsdMatrix, arch: &DecoderArch) -> Result<()> {
    single_output(arch)?;
    if latents.code_len() != arch.latent_len() {
        return Err(Error::invalid("latent code length does not match the arch"));
    }
    if latents.emitters() != psd.emitters() {
        return Err(Error::invalid(format!(
            "{} latent codes but {} PSD columns",
            latents.emitters(),
            psd.emitters()
        )));
    }
    Ok(())
}

/// Σ_r G_θ(z_r) ∘ c_r.
pub fn forward_all(
    params: &DecoderParams,
    latents: &LatentCodes,
    psd: &PsdMatrix,
    arch: &DecoderArch,
) -> Result<RadioMapTensor> {
    check_factors(latents, psd, arch)?;
    let slfs = (0..latents.emitters())
        .map(|r| forward(params, latents.code(r), arch))
        .collect::<Result<Vec<_>>>()?;
    assemble_map(&slfs, psd)
}

/// Gradients with respect to (θ, Z, C); `latents` and `psd` are emitter-major
/// like their owners.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub theta: Vec<f64>,
    pub latents: Vec<f64>,
    pub psd: Vec<f64>,
}

impl Gradients {
    pub fn zeros(n_theta: usize, n_latent: usize, n_psd: usize) -> Self {
        Self {
            theta: vec![0.0; n_theta],
            latents: vec![0.0; n_latent],
            psd: vec![0.0; n_psd],
        }
    }
}

/// Exact vector-Jacobian product of [`forward_all`] for an I×J×K adjoint.
pub fn backward(
    params: &DecoderParams,
    latents: &LatentCodes,
    psd: &PsdMatrix,
    arch: &DecoderArch,
    cotangent: &[f64],
) -> Result<Gradients> {
    check_factors(latents, psd, arch)?;
    let side = arch.output_side();
    let bins = psd.bins();
    if cotangent.len() != side * side * bins {
        return Err(Error::invalid(format!(
            "cotangent has {} entries, expected {}",
            cotangent.len(),
            side * side * bins
        )));
    }
    let r_count = latents.emitters();
    let mut grads = Gradients::zeros(params.len(), latents.as_flat().len(), psd.as_flat().len());
    for r in 0..r_count {
        let trace = decode(arch, params, latents.code(r))?;
        let column = psd.column(r);
        let mut grad_slf = vec![0.0; side * side];
        let gc = &mut grads.psd[r * bins..(r + 1) * bins];
        for (cell, (gs, s)) in grad_slf.iter_mut().zip(&trace.output).enumerate() {
            let fiber = &cotangent[cell * bins..(cell + 1) * bins];
            *gs = fiber.iter().zip(column).map(|(g, c)| g * c).sum();
            for (dst, g) in gc.iter_mut().zip(fiber) {
                *dst += s * g;
            }
        }
        let gz = decode_backward(arch, params, &trace, &grad_slf, &mut grads.theta);
        grads.latents[r * arch.latent_len()..(r + 1) * arch.latent_len()].copy_from_slice(&gz);
    }
    Ok(grads)
}
