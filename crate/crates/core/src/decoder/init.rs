use rand::Rng;

use crate::adam::{Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::seed::Seed;
use crate::synth::h_transform;
use crate::tensor::SlfMatrix;

use super::arch::DecoderArch;
use super::network::{decode, decode_backward};
use super::params::{DecoderParams, LatentCodes};

/// Target SLFs for a warm start, with the inner fit budget. The fit compares
/// log-compressed fields, ln(S + a), so weak regions count as much as the
/// peaks.
#[derive(Clone, Debug)]
pub struct WarmStart {
    pub targets: Vec<SlfMatrix>,
    pub steps: usize,
    pub lr: f64,
    pub a_offset: f64,
}

#[derive(Clone, Debug)]
pub enum ParamInit {
    /// Kernels and head U[−1, 1].
    Uniform,
    /// Glorot-uniform kernels and head.
    Xavier,
    /// Xavier draw followed by a short Adam fit to the targets.
    WarmStart(WarmStart),
}

/// Draw (θ, Z) for `emitters` codes. Normalization affines start at scale 1,
/// shift 0; latent codes are U[−1, 1] under every scheme.
pub fn init_params(
    arch: &DecoderArch,
    emitters: usize,
    scheme: &ParamInit,
    seed: Seed,
) -> Result<(DecoderParams, LatentCodes)> {
    if emitters == 0 {
        return Err(Error::invalid("need at least one emitter"));
    }
    let mut params = DecoderParams::zeros(arch)?;
    let layout = params.layout().clone();
    let mut rng = seed.derive("decoder-weights").rng();
    let n2 = arch.kernel * arch.kernel;
    let xavier = !matches!(scheme, ParamInit::Uniform);
    {
        let theta = params.values_mut();
        for (b, bl) in layout.blocks.iter().enumerate() {
            let bound = if xavier {
                (6.0 / ((arch.widths[b] + arch.widths[b + 1]) * n2) as f64).sqrt()
            } else {
                1.0
            };
            theta[bl.kernel.clone()]
                .iter_mut()
                .for_each(|w| *w = rng.random_range(-bound..=bound));
        }
        let l = arch.n_blocks();
        let bound = if xavier {
            (6.0 / (arch.widths[l] + arch.widths[l + 1]) as f64).sqrt()
        } else {
            1.0
        };
        theta[layout.head.clone()]
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-bound..=bound));
    }
    let mut zrng = seed.derive("latents").rng();
    let z: Vec<f64> = (0..emitters * arch.latent_len())
        .map(|_| zrng.random_range(-1.0..=1.0))
        .collect();
    let mut latents = LatentCodes::new(arch.latent_len(), z)?;

    if let ParamInit::WarmStart(ws) = scheme {
        if ws.targets.len() != emitters {
            return Err(Error::invalid(format!(
                "{} warm-start targets for {emitters} emitters",
                ws.targets.len()
            )));
        }
        fit_to_slfs(arch, &mut params, &mut latents, ws)?;
    }
    Ok((params, latents))
}

/// Σ_r ‖ln(G_θ(z_r) + a) − ln(T_r + a)‖²_F.
pub fn slf_fit_error(
    arch: &DecoderArch,
    params: &DecoderParams,
    latents: &LatentCodes,
    targets: &[SlfMatrix],
    a_offset: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (r, t) in targets.iter().enumerate() {
        let out = decode(arch, params, latents.code(r))?.output;
        total += out
            .iter()
            .zip(t.data())
            .map(|(&s, &ts)| (h_transform(s, a_offset) - h_transform(ts, a_offset)).powi(2))
            .sum::<f64>();
    }
    Ok(total)
}

/// Adam on (θ, Z) against the warm-start targets, keeping the best iterate.
fn fit_to_slfs(
    arch: &DecoderArch,
    params: &mut DecoderParams,
    latents: &mut LatentCodes,
    ws: &WarmStart,
) -> Result<()> {
    let side = arch.output_side();
    if ws
        .targets
        .iter()
        .any(|t| t.rows() != side || t.cols() != side)
    {
        return Err(Error::invalid(format!(
            "warm-start targets must be {side}x{side}"
        )));
    }
    let a = ws.a_offset;
    let log_targets: Vec<Vec<f64>> = ws
        .targets
        .iter()
        .map(|t| t.data().iter().map(|&v| h_transform(v, a)).collect())
        .collect();
    let mut opt_theta = Adam::new(params.len(), ws.lr, AdamConfig::default());
    let mut opt_z = Adam::new(latents.as_flat().len(), ws.lr, AdamConfig::default());
    let code_len = arch.latent_len();
    let mut best = (f64::INFINITY, params.clone(), latents.clone());
    for _ in 0..=ws.steps {
        let mut loss = 0.0;
        let mut g_theta = vec![0.0; params.len()];
        let mut g_z = vec![0.0; latents.as_flat().len()];
        for (r, target) in log_targets.iter().enumerate() {
            let trace = decode(arch, params, latents.code(r))?;
            let grad_out: Vec<f64> = trace
                .output
                .iter()
                .zip(target)
                .map(|(&s, &t)| {
                    let resid = h_transform(s, a) - t;
                    loss += resid * resid;
                    2.0 * resid / (s + a)
                })
                .collect();
            let gz = decode_backward(arch, params, &trace, &grad_out, &mut g_theta);
            g_z[r * code_len..(r + 1) * code_len].copy_from_slice(&gz);
        }
        if !loss.is_finite() {
            break;
        }
        if loss < best.0 {
            best = (loss, params.clone(), latents.clone());
        }
        opt_theta.step(params.values_mut(), &g_theta);
        opt_z.step(latents.as_flat_mut(), &g_z);
    }
    *params = best.1;
    *latents = best.2;
    Ok(())
}
