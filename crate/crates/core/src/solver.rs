//! Alternating Adam recovery of (θ, Z, C) with nonnegativity projection.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::adam::{Adam, AdamConfig};
use crate::baselines::{BtdConfig, btd_recover, idw_interpolate};
use crate::decoder::{
    DecoderArch, DecoderParams, LatentCodes, ParamInit, WarmStart, forward, forward_all,
    init_params,
};
use crate::error::{Error, Result};
use crate::objectives::{RegWeights, objective};
use crate::seed::Seed;
use crate::synth::{Observations, h_inverse};
use crate::tensor::{PsdMatrix, RadioMapTensor, SlfMatrix};

/// How (θ, Z, C) are initialized before the main loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitScheme {
    /// Factor a BTD estimate and fit the decoder to its spatial factors.
    Btd,
    /// Same, starting from an inverse-distance interpolation.
    Interpolation,
    /// Kernels U[−1, 1], C ~ U[0, 1].
    Uniform,
    /// Glorot-uniform kernels, C ~ U[0, 1].
    Xavier,
}

impl FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "btd" => Ok(Self::Btd),
            "interpolation" | "idw" => Ok(Self::Interpolation),
            "uniform" => Ok(Self::Uniform),
            "xavier" => Ok(Self::Xavier),
            other => Err(Error::invalid(format!("unknown init scheme {other:?}"))),
        }
    }
}

impl fmt::Display for InitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Btd => "btd",
            Self::Interpolation => "interpolation",
            Self::Uniform => "uniform",
            Self::Xavier => "xavier",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Step size for the decoder weights θ and latent codes Z.
    pub lr_unn: f64,
    /// Step size for the PSD matrix C.
    pub lr_psd: f64,
    pub max_iter: usize,
    /// Stop once |L_k − L_{k−1}| / max(1, |L_{k−1}|) falls below this.
    pub tol: f64,
    /// Consecutive iterations the relative change must stay below `tol`.
    pub patience: usize,
    pub reg: RegWeights,
    pub adam: AdamConfig,
    pub init: InitScheme,
    /// Adam steps used to fit the decoder to reference SLFs.
    pub warm_steps: usize,
    pub btd: BtdConfig,
    pub idw_power: f64,
    /// Independent initializations; the run with the lowest final loss wins.
    pub restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lr_unn: 0.05,
            lr_psd: 0.001,
            max_iter: 300,
            tol: 1e-3,
            patience: 10,
            reg: RegWeights::default(),
            adam: AdamConfig::default(),
            init: InitScheme::Interpolation,
            warm_steps: 100,
            btd: BtdConfig::default(),
            idw_power: 2.0,
            restarts: 4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_unn > 0.0 && self.lr_psd > 0.0) {
            return Err(Error::invalid("learning rates must be > 0"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be > 0"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be >= 1"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be >= 1"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be >= 1"));
        }
        if !(self.idw_power > 0.0) {
            return Err(Error::invalid("idw_power must be > 0"));
        }
        self.reg.validate()
    }
}

/// One iterate of the factored model.
#[derive(Clone, Debug, PartialEq)]
pub struct FitState {
    pub params: DecoderParams,
    pub latents: LatentCodes,
    pub psd: PsdMatrix,
}

impl FitState {
    pub fn assemble(&self, arch: &DecoderArch) -> Result<RadioMapTensor> {
        forward_all(&self.params, &self.latents, &self.psd, arch)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    FullPrecision,
    Quantized,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::FullPrecision => "fp",
            Self::Quantized => "quantized",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIter,
}

/// Loss at the initial point and after every update.
#[derive(Clone, Debug, PartialEq)]
pub struct LossTrace {
    pub kind: LossKind,
    pub losses: Vec<f64>,
    pub stop: StopReason,
}

impl LossTrace {
    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("trace holds the initial loss")
    }

    pub fn iterations(&self) -> usize {
        self.losses.len().saturating_sub(1)
    }

    /// `iter,loss` rows under a header; the header comment records the loss kind.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# loss={}\niter,loss\n", self.kind);
        for (k, l) in self.losses.iter().enumerate() {
            out.push_str(&format!("{k},{l:e}\n"));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct Recovery {
    pub estimate: RadioMapTensor,
    pub state: FitState,
    pub trace: LossTrace,
}

fn relative_change(prev: f64, now: f64) -> f64 {
    (now - prev).abs() / prev.abs().max(1.0)
}

/// Recover the full map from observations: for each restart, initialize per
/// `config.init` and run the alternating loop; keep the run whose final loss
/// is lowest. Fails only if every restart diverges.
pub fn recover(
    obs: &Observations,
    arch: &DecoderArch,
    emitters: usize,
    config: &SolverConfig,
    seed: Seed,
) -> Result<Recovery> {
    config.validate()?;
    let mut best: Option<Recovery> = None;
    let mut first_err = None;
    for t in 0..config.restarts {
        let run_seed = seed.derive("restart").derive_index(t as u64);
        let run = initialize(obs, arch, emitters, config, run_seed)
            .and_then(|init| recover_from(obs, arch, init, config));
        match run {
            Ok(rec) => {
                if best
                    .as_ref()
                    .is_none_or(|b| rec.trace.final_loss() < b.trace.final_loss())
                {
                    best = Some(rec);
                }
            }
            Err(e @ Error::Diverged { .. }) => {
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| first_err.expect("at least one restart ran"))
}

/// The alternating loop from a given starting point. Each iteration takes
/// one gradient of the full objective, then an Adam step on C, the projection
/// C ← max(C, 0), an Adam step on Z and an Adam step on θ.
pub fn recover_from(
    obs: &Observations,
    arch: &DecoderArch,
    init: FitState,
    config: &SolverConfig,
) -> Result<Recovery> {
    config.validate()?;
    let (rows, cols, bins) = obs.dims();
    if rows != arch.output_side() || cols != arch.output_side() {
        return Err(Error::invalid(format!(
            "{rows}x{cols} grid but the decoder emits {0}x{0}",
            arch.output_side()
        )));
    }
    if init.psd.bins() != bins {
        return Err(Error::invalid("initial PSD matrix does not match K"));
    }
    let kind = if obs.is_quantized() {
        LossKind::Quantized
    } else {
        LossKind::FullPrecision
    };
    let mut state = init;
    let mut opt_c = Adam::new(state.psd.as_flat().len(), config.lr_psd, config.adam);
    let mut opt_z = Adam::new(state.latents.as_flat().len(), config.lr_unn, config.adam);
    let mut opt_theta = Adam::new(state.params.len(), config.lr_unn, config.adam);
    let mut losses = Vec::with_capacity(config.max_iter + 1);
    let mut stop = StopReason::MaxIter;
    let mut last_finite = state.clone();
    let mut calm = 0;
    for iteration in 0..=config.max_iter {
        let (loss, grads) = objective(
            &state.params,
            &state.latents,
            &state.psd,
            arch,
            obs,
            &config.reg,
        )?;
        let finite = loss.is_finite()
            && grads
                .theta
                .iter()
                .chain(&grads.latents)
                .chain(&grads.psd)
                .all(|g| g.is_finite());
        if !finite {
            return Err(Error::Diverged {
                iteration,
                trace: losses,
                last_finite: Some(Box::new(last_finite)),
            });
        }
        losses.push(loss);
        last_finite = state.clone();
        if let [.., prev, now] = losses[..] {
            if relative_change(prev, now) < config.tol {
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
        let mut c = state.psd.as_flat().to_vec();
        opt_c.step(&mut c, &grads.psd);
        c.iter_mut().for_each(|v| *v = v.max(0.0));
        state.psd = PsdMatrix::from_columns_flat(bins, state.psd.emitters(), c)?;
        opt_z.step(state.latents.as_flat_mut(), &grads.latents);
        opt_theta.step(state.params.values_mut(), &grads.theta);
    }
    let estimate = state.assemble(arch)?;
    Ok(Recovery {
        estimate,
        state,
        trace: LossTrace { kind, losses, stop },
    })
}

/// Starting point per `config.init`.
pub fn initialize(
    obs: &Observations,
    arch: &DecoderArch,
    emitters: usize,
    config: &SolverConfig,
    seed: Seed,
) -> Result<FitState> {
    if emitters == 0 {
        return Err(Error::invalid("R must be >= 1"));
    }
    let bins = obs.dims().2;
    let a = obs.a_offset();
    match config.init {
        InitScheme::Uniform | InitScheme::Xavier => {
            let scheme = if config.init == InitScheme::Uniform {
                ParamInit::Uniform
            } else {
                ParamInit::Xavier
            };
            let (params, latents) = init_params(arch, emitters, &scheme, seed.derive("decoder"))?;
            let psd = uniform_psd(bins, emitters, seed)?;
            Ok(FitState {
                params,
                latents,
                psd,
            })
        }
        InitScheme::Btd | InitScheme::Interpolation => {
            let logs = obs.log_estimates();
            let reference = if config.init == InitScheme::Btd {
                let linear = logs.map_values(|y| h_inverse(y, a));
                let btd = BtdConfig {
                    seed: seed.derive("btd").value(),
                    ..config.btd.clone()
                };
                btd_recover(&linear, emitters, &btd)?
            } else {
                idw_interpolate(&logs, config.idw_power, a)?
            };
            let opts = ReferenceFit {
                warm_steps: config.warm_steps,
                lr: config.lr_unn,
                a_offset: a,
            };
            init_from_reference_with(&reference, emitters, arch, &opts, seed)
        }
    }
}

fn uniform_psd(bins: usize, emitters: usize, seed: Seed) -> Result<PsdMatrix> {
    let mut rng = seed.derive("psd-init").rng();
    PsdMatrix::from_columns_flat(
        bins,
        emitters,
        (0..bins * emitters)
            .map(|_| rng.random_range(0.0..1.0))
            .collect(),
    )
}

/// Settings of the reference-based warm start.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceFit {
    pub warm_steps: usize,
    pub lr: f64,
    pub a_offset: f64,
}

impl Default for ReferenceFit {
    fn default() -> Self {
        Self {
            warm_steps: 100,
            lr: 0.05,
            a_offset: 1e-3,
        }
    }
}

/// Initialize (θ, Z, C) so that Σ_r G_θ(z_r) ∘ c_r approximates `x_ref`.
pub fn init_from_reference(
    x_ref: &RadioMapTensor,
    emitters: usize,
    arch: &DecoderArch,
    seed: Seed,
) -> Result<FitState> {
    init_from_reference_with(x_ref, emitters, arch, &ReferenceFit::default(), seed)
}

const NMF_ITERS: usize = 300;

/// Nonnegative rank-R factorization of the (IJ)×K unfolding by hierarchical
/// alternating least squares. Returns the spatial factors (IJ per emitter)
/// and PSD columns (K per emitter). `c` holds the starting PSD columns.
pub fn nmf_unfolding(
    x: &RadioMapTensor,
    emitters: usize,
    c: &mut [Vec<f64>],
    seed: Seed,
) -> Vec<Vec<f64>> {
    let (rows, cols, bins) = x.dims();
    let cells = rows * cols;
    let data = x.data();
    let mut rng = seed.derive("nmf").rng();
    let mut s: Vec<Vec<f64>> = (0..emitters)
        .map(|_| (0..cells).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let floor = 1e-12;
    for _ in 0..NMF_ITERS {
        // S update: s_r ← max(0, (X c_r − Σ_{q≠r} s_q (c_q·c_r)) / ‖c_r‖²)
        let xc: Vec<Vec<f64>> = c
            .iter()
            .map(|cr| {
                (0..cells)
                    .map(|p| {
                        data[p * bins..(p + 1) * bins]
                            .iter()
                            .zip(cr)
                            .map(|(a, b)| a * b)
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let cc: Vec<Vec<f64>> = c
            .iter()
            .map(|a| {
                c.iter()
                    .map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum())
                    .collect()
            })
            .collect();
        for r in 0..emitters {
            let denom = cc[r][r].max(floor);
            for p in 0..cells {
                let other: f64 =
                    (0..emitters).map(|q| s[q][p] * cc[q][r]).sum::<f64>() - s[r][p] * cc[r][r];
                s[r][p] = ((xc[r][p] - other) / denom).max(floor);
            }
        }
        // C update, symmetric
        let xs: Vec<Vec<f64>> = s
            .iter()
            .map(|sr| {
                let mut acc = vec![0.0; bins];
                for (p, w) in sr.iter().enumerate() {
                    for (a, v) in acc.iter_mut().zip(&data[p * bins..(p + 1) * bins]) {
                        *a += w * v;
                    }
                }
                acc
            })
            .collect();
        let ss: Vec<Vec<f64>> = s
            .iter()
            .map(|a| {
                s.iter()
                    .map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum())
                    .collect()
            })
            .collect();
        for r in 0..emitters {
            let denom = ss[r][r].max(floor);
            for k in 0..bins {
                let other: f64 =
                    (0..emitters).map(|q| c[q][k] * ss[q][r]).sum::<f64>() - c[r][k] * ss[r][r];
                c[r][k] = ((xs[r][k] - other) / denom).max(0.0);
            }
        }
    }
    s
}

/// Initialization from a reference map with explicit warm-start settings.
///
/// The reference is factored into R nonnegative (SLF, PSD) pairs, each SLF is
/// scaled to peak at 1, the decoder is fitted to those SLFs in the log domain,
/// and C is refit by clamped least squares against the decoder outputs and
/// rescaled to the reference energy.
pub fn init_from_reference_with(
    x_ref: &RadioMapTensor,
    emitters: usize,
    arch: &DecoderArch,
    opts: &ReferenceFit,
    seed: Seed,
) -> Result<FitState> {
    if x_ref.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("reference map must be finite"));
    }
    if emitters == 0 {
        return Err(Error::invalid("R must be >= 1"));
    }
    let (rows, cols, bins) = x_ref.dims();
    let side = arch.output_side();
    if rows != side || cols != side {
        return Err(Error::invalid(format!(
            "reference is {rows}x{cols}, decoder emits {side}x{side}"
        )));
    }
    let psd0 = uniform_psd(bins, emitters, seed)?;
    let mut c: Vec<Vec<f64>> = (0..emitters).map(|r| psd0.column(r).to_vec()).collect();
    let mut s = nmf_unfolding(x_ref, emitters, &mut c, seed);
    for (sr, cr) in s.iter_mut().zip(&mut c) {
        let peak = sr.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            sr.iter_mut().for_each(|v| *v /= peak);
            cr.iter_mut().for_each(|v| *v *= peak);
        }
    }
    let targets = s
        .into_iter()
        .map(|sr| SlfMatrix::new(rows, cols, sr))
        .collect::<Result<Vec<_>>>()?;
    let warm = WarmStart {
        targets,
        steps: opts.warm_steps,
        lr: opts.lr,
        a_offset: opts.a_offset,
    };
    let (params, latents) = init_params(
        arch,
        emitters,
        &ParamInit::WarmStart(warm),
        seed.derive("decoder"),
    )?;
    let slfs = (0..emitters)
        .map(|r| forward(&params, latents.code(r), arch))
        .collect::<Result<Vec<_>>>()?;
    let psd = refit_psd(x_ref, &slfs, &c)?;
    Ok(FitState {
        params,
        latents,
        psd,
    })
}

/// Least squares for C with the decoder SLFs fixed, clamped at zero and
/// rescaled so the assembled map matches the reference energy. Falls back to
/// the supplied columns if the normal equations are singular.
fn refit_psd(
    x_ref: &RadioMapTensor,
    slfs: &[SlfMatrix],
    fallback: &[Vec<f64>],
) -> Result<PsdMatrix> {
    let (_, _, bins) = x_ref.dims();
    let emitters = slfs.len();
    let cells = slfs[0].data().len();
    let data = x_ref.data();
    let mut gram = nalgebra::DMatrix::<f64>::zeros(emitters, emitters);
    let mut rhs = nalgebra::DMatrix::<f64>::zeros(emitters, bins);
    for p in 0..cells {
        for r in 0..emitters {
            let sr = slfs[r].data()[p];
            for q in 0..emitters {
                gram[(r, q)] += sr * slfs[q].data()[p];
            }
            for k in 0..bins {
                rhs[(r, k)] += sr * data[p * bins + k];
            }
        }
    }
    let mut columns: Vec<Vec<f64>> = match gram.clone().cholesky() {
        Some(ch) => {
            let sol = ch.solve(&rhs);
            (0..emitters)
                .map(|r| (0..bins).map(|k| sol[(r, k)].max(0.0)).collect())
                .collect()
        }
        None => fallback.to_vec(),
    };
    let mut model_energy = 0.0;
    let mut ref_energy = 0.0;
    for p in 0..cells {
        for k in 0..bins {
            let v: f64 = (0..emitters)
                .map(|r| slfs[r].data()[p] * columns[r][k])
                .sum();
            model_energy += v * v;
            ref_energy += data[p * bins + k].powi(2);
        }
    }
    if model_energy > 0.0 {
        let scale = (ref_energy / model_energy).sqrt();
        columns.iter_mut().flatten().for_each(|v| *v *= scale);
    }
    PsdMatrix::from_columns(&columns)
}
