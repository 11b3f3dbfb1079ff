//! Experiment configuration in a flat `key = value` format.
//!
//! Blank lines and `#` comments are ignored; every key is optional and falls
//! back to its default; unknown or repeated keys are rejected.
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `I`, `J`, `K` | grid rows, columns, frequency bins | 64, 64, 64 |
//! | `R` | emitters in the generated scenario | 4 |
//! | `Xc` | shadowing decorrelation distance (m) | 90 |
//! | `eta` | shadowing standard deviation (dB) | 6 |
//! | `path_loss_exponent` | path-loss exponent | 2 |
//! | `psd_bumps_min`, `psd_bumps_max` | Gaussian bumps per PSD | 2, 4 |
//! | `psd_amp_min`, `psd_amp_max` | bump amplitude range | 0.5, 2 |
//! | `psd_width_min`, `psd_width_max` | bump width range (bins) | 2, 6 |
//! | `rho` | sampled fraction of grid cells | 0.1 |
//! | `B` | quantizer bits; 0 means full precision | 0 |
//! | `sigma` | quantizer noise std in the log domain | 0.1 |
//! | `a_offset` | offset a in ln(x + a) | 0.001 |
//! | `seed` | base seed | 0 |
//! | `trials` | comma-separated trial seeds; empty means `seed` alone | |
//! | `method` | `proposed`, `naive`, `idw` or `btd` | proposed |
//! | `R_hat` | emitters assumed by the recovery; 0 means `R` | 0 |
//! | `init` | `btd`, `interpolation`, `uniform` or `xavier` | interpolation |
//! | `max_iter`, `tol`, `patience` | stopping rule | 300, 0.001, 10 |
//! | `restarts` | independent initializations | 4 |
//! | `warm_steps` | Adam steps of the reference fit | 100 |
//! | `lr_unn`, `lr_psd` | step sizes for (θ, Z) and for C | 0.05, 0.001 |
//! | `lambda1`, `lambda2`, `lambda3` | penalties on Z, C, θ | 0.001, 0.001, 0.0001 |
//! | `adam_beta1`, `adam_beta2`, `adam_eps` | Adam moments | 0.9, 0.999, 1e-8 |
//! | `btd_rank`, `btd_iters`, `btd_tol` | BTD baseline | 4, 200, 1e-6 |
//! | `idw_power` | IDW distance exponent | 2 |

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::solver::SolverConfig;
use crate::synth::{QuantizationParams, ScenarioParams, SensingParams};

/// Recovery method selected for an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Proposed,
    Naive,
    Idw,
    Btd,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Self::Proposed),
            "naive" => Ok(Self::Naive),
            "idw" => Ok(Self::Idw),
            "btd" => Ok(Self::Btd),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Proposed => "proposed",
            Self::Naive => "naive",
            Self::Idw => "idw",
            Self::Btd => "btd",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioParams,
    pub sensing: SensingParams,
    pub seed: u64,
    pub trials: Vec<u64>,
    pub method: Method,
    /// Emitters assumed by the recovery; `None` uses the scenario's R.
    pub r_hat: Option<usize>,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioParams::default(),
            sensing: SensingParams::default(),
            seed: 0,
            trials: Vec::new(),
            method: Method::Proposed,
            r_hat: None,
            solver: SolverConfig::default(),
        }
    }
}

const KEYS: &[&str] = &[
    "I",
    "J",
    "K",
    "R",
    "Xc",
    "eta",
    "path_loss_exponent",
    "psd_bumps_min",
    "psd_bumps_max",
    "psd_amp_min",
    "psd_amp_max",
    "psd_width_min",
    "psd_width_max",
    "rho",
    "B",
    "sigma",
    "a_offset",
    "seed",
    "trials",
    "method",
    "R_hat",
    "init",
    "max_iter",
    "tol",
    "patience",
    "restarts",
    "warm_steps",
    "lr_unn",
    "lr_psd",
    "lambda1",
    "lambda2",
    "lambda3",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "btd_rank",
    "btd_iters",
    "btd_tol",
    "idw_power",
];

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {raw:?}")))
}

impl ExperimentConfig {
    /// Parse the `key = value` text; missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!(
                    "line {}: unknown key {key:?}",
                    lineno + 1
                )));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key {key:?}",
                    lineno + 1
                )));
            }
        }
        let mut cfg = Self::default();
        for (key, raw) in &entries {
            cfg.set(key, raw)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Apply one key; used by the parser and by command-line overrides.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let sc = &mut self.scenario;
        let sv = &mut self.solver;
        match key {
            "I" => sc.rows = parse_value(key, raw)?,
            "J" => sc.cols = parse_value(key, raw)?,
            "K" => sc.bins = parse_value(key, raw)?,
            "R" => sc.emitters = parse_value(key, raw)?,
            "Xc" => sc.xc = parse_value(key, raw)?,
            "eta" => sc.eta = parse_value(key, raw)?,
            "path_loss_exponent" => sc.path_loss_exponent = parse_value(key, raw)?,
            "psd_bumps_min" => sc.psd.bumps_min = parse_value(key, raw)?,
            "psd_bumps_max" => sc.psd.bumps_max = parse_value(key, raw)?,
            "psd_amp_min" => sc.psd.amp_min = parse_value(key, raw)?,
            "psd_amp_max" => sc.psd.amp_max = parse_value(key, raw)?,
            "psd_width_min" => sc.psd.width_min = parse_value(key, raw)?,
            "psd_width_max" => sc.psd.width_max = parse_value(key, raw)?,
            "rho" => self.sensing.rho = parse_value(key, raw)?,
            "B" => {
                let bits: u32 = parse_value(key, raw)?;
                let sigma = self.sensing.quantization.map_or(0.1, |q| q.sigma);
                self.sensing.quantization =
                    (bits > 0).then_some(QuantizationParams { bits, sigma });
            }
            "sigma" => {
                let sigma = parse_value(key, raw)?;
                self.sensing.quantization = match self.sensing.quantization {
                    Some(q) => Some(QuantizationParams { sigma, ..q }),
                    // remembered for a later B key
                    None => Some(QuantizationParams { bits: 0, sigma }),
                };
            }
            "a_offset" => self.sensing.a_offset = parse_value(key, raw)?,
            "seed" => self.seed = parse_value(key, raw)?,
            "trials" => {
                self.trials = raw
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_value(key, s))
                    .collect::<Result<_>>()?;
            }
            "method" => self.method = raw.parse()?,
            "R_hat" => {
                let r: usize = parse_value(key, raw)?;
                self.r_hat = (r > 0).then_some(r);
            }
            "init" => {
                sv.init = raw
                    .parse()
                    .map_err(|e: Error| Error::Config(e.to_string()))?
            }
            "max_iter" => sv.max_iter = parse_value(key, raw)?,
            "tol" => sv.tol = parse_value(key, raw)?,
            "patience" => sv.patience = parse_value(key, raw)?,
            "restarts" => sv.restarts = parse_value(key, raw)?,
            "warm_steps" => sv.warm_steps = parse_value(key, raw)?,
            "lr_unn" => sv.lr_unn = parse_value(key, raw)?,
            "lr_psd" => sv.lr_psd = parse_value(key, raw)?,
            "lambda1" => sv.reg.lambda1 = parse_value(key, raw)?,
            "lambda2" => sv.reg.lambda2 = parse_value(key, raw)?,
            "lambda3" => sv.reg.lambda3 = parse_value(key, raw)?,
            "adam_beta1" => sv.adam.beta1 = parse_value(key, raw)?,
            "adam_beta2" => sv.adam.beta2 = parse_value(key, raw)?,
            "adam_eps" => sv.adam.eps = parse_value(key, raw)?,
            "btd_rank" => sv.btd.rank = parse_value(key, raw)?,
            "btd_iters" => sv.btd.iters = parse_value(key, raw)?,
            "btd_tol" => sv.btd.tol = parse_value(key, raw)?,
            "idw_power" => sv.idw_power = parse_value(key, raw)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        self.scenario.validate().map_err(wrap)?;
        self.solver.validate().map_err(wrap)?;
        if !(self.sensing.rho > 0.0 && self.sensing.rho <= 1.0) {
            return Err(Error::Config(format!(
                "rho must lie in (0, 1], got {}",
                self.sensing.rho
            )));
        }
        if !(self.sensing.a_offset > 0.0) {
            return Err(Error::Config("a_offset must be > 0".into()));
        }
        if let Some(q) = self.sensing.quantization {
            if q.bits > 16 {
                return Err(Error::Config(format!("B = {} exceeds 16", q.bits)));
            }
            if !(q.sigma > 0.0) {
                return Err(Error::Config("sigma must be > 0".into()));
            }
        }
        Ok(())
    }

    /// Sensing parameters with a sigma-only entry (no bits) dropped.
    pub fn effective_sensing(&self) -> SensingParams {
        let mut s = self.sensing.clone();
        if s.quantization.is_some_and(|q| q.bits == 0) {
            s.quantization = None;
        }
        s
    }

    /// Trial seeds: the explicit list, or the base seed alone.
    pub fn trial_seeds(&self) -> Vec<u64> {
        if self.trials.is_empty() {
            vec![self.seed]
        } else {
            self.trials.clone()
        }
    }

    pub fn recovery_emitters(&self) -> usize {
        self.r_hat.unwrap_or(self.scenario.emitters)
    }

    /// Every key in a fixed order; parsing the result reproduces `self`.
    pub fn to_text(&self) -> String {
        let sc = &self.scenario;
        let sv = &self.solver;
        let sensing = self.effective_sensing();
        let (bits, sigma) = match self.sensing.quantization {
            Some(q) => (
                if sensing.quantization.is_some() {
                    q.bits
                } else {
                    0
                },
                q.sigma,
            ),
            None => (0, 0.1),
        };
        let trials: Vec<String> = self.trials.iter().map(u64::to_string).collect();
        let rows: Vec<(&str, String)> = vec![
            ("I", sc.rows.to_string()),
            ("J", sc.cols.to_string()),
            ("K", sc.bins.to_string()),
            ("R", sc.emitters.to_string()),
            ("Xc", sc.xc.to_string()),
            ("eta", sc.eta.to_string()),
            ("path_loss_exponent", sc.path_loss_exponent.to_string()),
            ("psd_bumps_min", sc.psd.bumps_min.to_string()),
            ("psd_bumps_max", sc.psd.bumps_max.to_string()),
            ("psd_amp_min", sc.psd.amp_min.to_string()),
            ("psd_amp_max", sc.psd.amp_max.to_string()),
            ("psd_width_min", sc.psd.width_min.to_string()),
            ("psd_width_max", sc.psd.width_max.to_string()),
            ("rho", self.sensing.rho.to_string()),
            ("B", bits.to_string()),
            ("sigma", sigma.to_string()),
            ("a_offset", self.sensing.a_offset.to_string()),
            ("seed", self.seed.to_string()),
            ("trials", trials.join(",")),
            ("method", self.method.to_string()),
            ("R_hat", self.r_hat.unwrap_or(0).to_string()),
            ("init", sv.init.to_string()),
            ("max_iter", sv.max_iter.to_string()),
            ("tol", sv.tol.to_string()),
            ("patience", sv.patience.to_string()),
            ("restarts", sv.restarts.to_string()),
            ("warm_steps", sv.warm_steps.to_string()),
            ("lr_unn", sv.lr_unn.to_string()),
            ("lr_psd", sv.lr_psd.to_string()),
            ("lambda1", sv.reg.lambda1.to_string()),
            ("lambda2", sv.reg.lambda2.to_string()),
            ("lambda3", sv.reg.lambda3.to_string()),
            ("adam_beta1", sv.adam.beta1.to_string()),
            ("adam_beta2", sv.adam.beta2.to_string()),
            ("adam_eps", sv.adam.eps.to_string()),
            ("btd_rank", sv.btd.rank.to_string()),
            ("btd_iters", sv.btd.iters.to_string()),
            ("btd_tol", sv.btd.tol.to_string()),
            ("idw_power", sv.idw_power.to_string()),
        ];
        rows.into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
