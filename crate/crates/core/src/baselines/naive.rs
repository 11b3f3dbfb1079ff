use crate::adam::Adam;
use crate::decoder::{
    DecoderArch, DecoderParams, LatentCodes, ParamInit, decode, decode_backward, init_params,
};
use crate::error::{Error, Result};
use crate::objectives::DataTerm;
use crate::seed::Seed;
use crate::solver::{LossKind, LossTrace, SolverConfig, StopReason};
use crate::synth::{Observations, h_inverse};
use crate::tensor::RadioMapTensor;

/// Parameter budget shared by the decoder-based methods: 1080 + 16R.
pub fn unn_budget(emitters: usize) -> usize {
    1080 + 16 * emitters
}

const MAX_WIDTH: usize = 6;
const BLOCKS: usize = 4;

/// Widths of a 4-block decoder whose head emits `bins` channels, chosen so
/// that weights plus the latent code land closest to `budget`; accepted only
/// within ±5%.
pub fn naive_arch(bins: usize, side: usize, budget: usize) -> Result<DecoderArch> {
    if !side.is_multiple_of(1 << BLOCKS) {
        return Err(Error::invalid(format!(
            "grid side {side} is not divisible by {}",
            1 << BLOCKS
        )));
    }
    let latent_side = side >> BLOCKS;
    let mut best: Option<(usize, Vec<usize>)> = None;
    let mut widths = [1usize; BLOCKS];
    loop {
        let mut chain = vec![1];
        chain.extend_from_slice(&widths);
        chain.push(bins);
        let arch = DecoderArch {
            widths: chain.clone(),
            latent_side,
            ..DecoderArch::default()
        };
        let total = arch.count_params()? + arch.latent_len();
        let gap = total.abs_diff(budget);
        if best.as_ref().is_none_or(|(g, _)| gap < *g) {
            best = Some((gap, chain));
        }
        // odometer over 1..=MAX_WIDTH per block
        let mut pos = BLOCKS;
        loop {
            if pos == 0 {
                let (gap, chain) = best.expect("search visited at least one arch");
                if gap as f64 > 0.05 * budget as f64 {
                    return Err(Error::InfeasibleBudget { target: budget });
                }
                return Ok(DecoderArch {
                    widths: chain,
                    latent_side,
                    ..DecoderArch::default()
                });
            }
            pos -= 1;
            if widths[pos] < MAX_WIDTH {
                widths[pos] += 1;
                break;
            }
            widths[pos] = 1;
        }
    }
}

#[derive(Clone, Debug)]
pub struct NaiveRecovery {
    pub estimate: RadioMapTensor,
    pub arch: DecoderArch,
    /// Decoder weights plus latent entries.
    pub param_count: usize,
    pub trace: LossTrace,
}

/// Data term plus regularizers for a single decoder emitting all K bands,
/// scaled by `scale`.
fn naive_objective(
    arch: &DecoderArch,
    params: &DecoderParams,
    z: &[f64],
    locations: &[(usize, usize)],
    data: &DataTerm,
    scale: f64,
    config: &SolverConfig,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let trace = decode(arch, params, z)?;
    let bins = arch.out_channels();
    let hw = arch.output_side() * arch.output_side();
    let side = arch.output_side();
    let mut grad_out = vec![0.0; trace.output.len()];
    let mut loss = 0.0;
    for (n, &(i, j)) in locations.iter().enumerate() {
        let cell = i * side + j;
        for k in 0..bins {
            let (l, dx) = data.entry(n * bins + k, scale * trace.output[k * hw + cell]);
            loss += l;
            grad_out[k * hw + cell] = dx * scale;
        }
    }
    let mut g_theta = vec![0.0; params.len()];
    let mut g_z = decode_backward(arch, params, &trace, &grad_out, &mut g_theta);
    let reg = config.reg;
    loss += reg.lambda1 * z.iter().map(|v| v * v).sum::<f64>();
    loss += reg.lambda3 * params.values().iter().map(|v| v * v).sum::<f64>();
    g_z.iter_mut()
        .zip(z)
        .for_each(|(g, v)| *g += 2.0 * reg.lambda1 * v);
    g_theta
        .iter_mut()
        .zip(params.values())
        .for_each(|(g, v)| *g += 2.0 * reg.lambda3 * v);
    Ok((loss, g_theta, g_z))
}

fn naive_run(
    obs: &Observations,
    arch: &DecoderArch,
    scale: f64,
    config: &SolverConfig,
    seed: Seed,
) -> Result<(DecoderParams, LatentCodes, LossTrace)> {
    let (mut params, mut latents) = init_params(arch, 1, &ParamInit::Xavier, seed)?;
    let data = DataTerm::from_observations(obs);
    data.validate()?;
    let mut opt_theta = Adam::new(params.len(), config.lr_unn, config.adam);
    let mut opt_z = Adam::new(latents.as_flat().len(), config.lr_unn, config.adam);
    let mut losses = Vec::new();
    let mut stop = StopReason::MaxIter;
    let mut calm = 0;
    for iteration in 0..=config.max_iter {
        let (loss, g_theta, g_z) = naive_objective(
            arch,
            &params,
            latents.code(0),
            obs.locations(),
            &data,
            scale,
            config,
        )?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                iteration,
                trace: losses,
                last_finite: None,
            });
        }
        losses.push(loss);
        if let [.., prev, now] = losses[..] {
            if (now - prev).abs() / prev.abs().max(1.0) < config.tol {
                calm += 1;
                if calm >= config.patience {
                    stop = StopReason::Converged;
                    break;
                }
            } else {
                calm = 0;
            }
        }
        if iteration == config.max_iter {
            break;
        }
        opt_z.step(latents.as_flat_mut(), &g_z);
        opt_theta.step(params.values_mut(), &g_theta);
    }
    let kind = if obs.is_quantized() {
        LossKind::Quantized
    } else {
        LossKind::FullPrecision
    };
    Ok((params, latents, LossTrace { kind, losses, stop }))
}

/// Fit one deep decoder that emits the whole I×J×K tensor, without the
/// spatial/spectral factorization, under the 1080 + 16R budget. The Sigmoid
/// outputs are scaled by the largest observed linear power.
pub fn naive_unn_recover(
    obs: &Observations,
    emitters: usize,
    config: &SolverConfig,
    seed: Seed,
) -> Result<NaiveRecovery> {
    config.validate()?;
    let (rows, cols, bins) = obs.dims();
    if rows != cols {
        return Err(Error::invalid(format!(
            "naive decoder needs a square grid, got {rows}x{cols}"
        )));
    }
    let arch = naive_arch(bins, rows, unn_budget(emitters))?;
    let a = obs.a_offset();
    let scale = obs
        .log_estimates()
        .values()
        .iter()
        .map(|&y| h_inverse(y, a))
        .fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::invalid("observations carry no positive power"));
    }
    let mut best: Option<(DecoderParams, LatentCodes, LossTrace)> = None;
    let mut first_err = None;
    for t in 0..config.restarts {
        match naive_run(
            obs,
            &arch,
            scale,
            config,
            seed.derive("naive").derive_index(t as u64),
        ) {
            Ok(run) => {
                if best
                    .as_ref()
                    .is_none_or(|b| run.2.final_loss() < b.2.final_loss())
                {
                    best = Some(run);
                }
            }
            Err(e @ Error::Diverged { .. }) => {
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    let (params, latents, trace) = match best {
        Some(b) => b,
        None => return Err(first_err.expect("at least one restart ran")),
    };
    let out = decode(&arch, &params, latents.code(0))?.output;
    let hw = rows * cols;
    let mut data = vec![0.0; hw * bins];
    for cell in 0..hw {
        for k in 0..bins {
            data[cell * bins + k] = scale * out[k * hw + cell];
        }
    }
    let param_count = arch.count_params()? + arch.latent_len();
    Ok(NaiveRecovery {
        estimate: RadioMapTensor::new((rows, cols, bins), data)?,
        arch,
        param_count,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_met_for_default_grid() {
        for r in 1..=6 {
            let budget = unn_budget(r);
            let arch = naive_arch(64, 64, budget).unwrap();
            let total = arch.count_params().unwrap() + arch.latent_len();
            assert!(
                (total as f64 - budget as f64).abs() <= 0.05 * budget as f64,
                "R={r}: {total}"
            );
            assert_eq!(arch.out_channels(), 64);
            assert_eq!(arch.output_side(), 64);
        }
    }

    #[test]
    fn infeasible_budget_reported() {
        assert!(matches!(
            naive_arch(2000, 64, 1096),
            Err(Error::InfeasibleBudget { target: 1096 })
        ));
        assert!(naive_arch(64, 60, 1096).is_err());
    }
}
