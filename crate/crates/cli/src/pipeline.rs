//! Per-trial stages. Trial `s` lives in `<out>/seed-<s>/`; recoveries go to
//! `<out>/seed-<s>/<method>/`. Every stage writes a `<stage>.manifest` that is
//! itself a config file pinned to the trial seed.

use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rmc_core::analysis::{nmse, ssim_log_avg};
use rmc_core::baselines::{btd_recover, idw_interpolate, naive_unn_recover};
use rmc_core::config::{ExperimentConfig, Method};
use rmc_core::decoder::DecoderArch;
use rmc_core::io::{mask_read, mask_write, tensor_read, tensor_write};
use rmc_core::solver::recover;
use rmc_core::synth::{Observations, generate_scenario, h_inverse, observe};
use rmc_core::{Error, RadioMapTensor, Result, SamplingMask, Seed, mask_sample};
use sha2::{Digest, Sha256};

pub const METRICS_HEADER: &str = "scenario,seed,method,ssim,nmse,runtime_s";

/// The config as run for one trial: `seed` pinned, no trial list.
pub fn trial_config(cfg: &ExperimentConfig, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        trials: Vec::new(),
        ..cfg.clone()
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    Sha256::digest(cfg.to_text().as_bytes())
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

pub fn trial_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

pub fn scenario_label(cfg: &ExperimentConfig) -> String {
    let bits = cfg.effective_sensing().quantization.map_or(0, |q| q.bits);
    format!(
        "R{}_Rhat{}_rho{}_Xc{}_eta{}_B{}",
        cfg.scenario.emitters,
        cfg.recovery_emitters(),
        cfg.sensing.rho,
        cfg.scenario.xc,
        cfg.scenario.eta,
        bits
    )
}

/// Decoder for the proposed method on a square grid whose side is a multiple of 16.
pub fn proposed_arch(rows: usize, cols: usize) -> Result<DecoderArch> {
    if rows != cols || !rows.is_multiple_of(16) {
        return Err(Error::Config(format!(
            "decoder methods need a square grid with side divisible by 16, got {rows}x{cols}"
        )));
    }
    Ok(DecoderArch {
        latent_side: rows / 16,
        ..DecoderArch::default()
    })
}

/// Checks that need more than the key ranges.
pub fn check_runnable(cfg: &ExperimentConfig) -> Result<()> {
    if matches!(cfg.method, Method::Proposed | Method::Naive) {
        proposed_arch(cfg.scenario.rows, cfg.scenario.cols)?;
    }
    Ok(())
}

fn with_path<T>(path: &Path, res: Result<T>) -> Result<T> {
    res.map_err(|e| match e {
        Error::Io(io) => Error::Io(io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    })
}

fn write_manifest(dir: &Path, stage: &str, cfg: &ExperimentConfig, files: &[String]) -> Result<()> {
    let mut text = format!(
        "# rmc {stage}\n# config_hash = {}\n# seed = {}\n",
        config_hash(cfg),
        cfg.seed
    );
    for f in files {
        let _ = writeln!(text, "# file = {f}");
    }
    text.push_str(&cfg.to_text());
    let path = dir.join(format!("{stage}.manifest"));
    with_path(&path, fs::write(&path, text).map_err(Error::from))
}

fn create_dir(dir: &Path) -> Result<()> {
    with_path(dir, fs::create_dir_all(dir).map_err(Error::from))
}

pub fn generate_trial(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let scenario = generate_scenario(&cfg.scenario, Seed(cfg.seed))?;
    create_dir(dir)?;
    let mut files = vec!["map.rmt".to_string()];
    tensor_write(dir.join("map.rmt"), &scenario.map)?;
    for (r, slf) in scenario.slfs.iter().enumerate() {
        let name = format!("slf-{r}.rmt");
        tensor_write(
            dir.join(&name),
            &RadioMapTensor::new((slf.rows(), slf.cols(), 1), slf.data().to_vec())?,
        )?;
        files.push(name);
    }
    let psd = &scenario.psd;
    let mut text = String::from("k");
    for r in 0..psd.emitters() {
        let _ = write!(text, ",c{r}");
    }
    text.push('\n');
    for k in 0..psd.bins() {
        text.push_str(&k.to_string());
        for r in 0..psd.emitters() {
            let _ = write!(text, ",{}", psd.get(k, r));
        }
        text.push('\n');
    }
    fs::write(dir.join("psd.csv"), text)?;
    let mut text = String::from("r,i,j\n");
    for (r, (i, j)) in scenario.emitters.iter().enumerate() {
        let _ = writeln!(text, "{r},{i},{j}");
    }
    fs::write(dir.join("emitters.csv"), text)?;
    files.extend(["psd.csv".to_string(), "emitters.csv".to_string()]);
    write_manifest(dir, "generate", cfg, &files)
}

fn read_map(dir: &Path) -> Result<RadioMapTensor> {
    let path = dir.join("map.rmt");
    with_path(&path, tensor_read(&path))
}

fn draw_mask(cfg: &ExperimentConfig, map: &RadioMapTensor) -> Result<SamplingMask> {
    let (rows, cols, _) = map.dims();
    mask_sample(rows, cols, cfg.sensing.rho, Seed(cfg.seed).derive("mask"))
}

pub fn sample_trial(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    let map = read_map(dir)?;
    let mask = draw_mask(cfg, &map)?;
    mask_write(dir.join("mask.csv"), &mask)?;
    let obs = observe(&map, &mask, &cfg.effective_sensing(), Seed(cfg.seed))?;
    let mut text = String::new();
    match &obs {
        Observations::Full { values, .. } => {
            text.push_str("# log-domain values\n");
            for (n, (i, j)) in values.locations().iter().enumerate() {
                let _ = write!(text, "{i},{j}");
                for v in values.fiber(n) {
                    let _ = write!(text, ",{v}");
                }
                text.push('\n');
            }
        }
        Observations::Quantized { labels, spec } => {
            let _ = writeln!(text, "# labels, {} bits", spec.bits());
            let bins = labels.dims().2;
            for (n, (i, j)) in labels.locations().iter().enumerate() {
                let _ = write!(text, "{i},{j}");
                for l in &labels.labels()[n * bins..(n + 1) * bins] {
                    let _ = write!(text, ",{l}");
                }
                text.push('\n');
            }
        }
    }
    fs::write(dir.join("observations.csv"), text)?;
    write_manifest(
        dir,
        "sample",
        cfg,
        &["mask.csv".into(), "observations.csv".into()],
    )
}

/// Result of one recovery; a divergence is recorded, not raised.
#[derive(Clone, Debug)]
pub enum Outcome {
    Done {
        ssim: f64,
        nmse: f64,
        runtime_s: f64,
    },
    Diverged,
}

pub fn recover_trial(cfg: &ExperimentConfig, dir: &Path, metrics: &Path) -> Result<Outcome> {
    let map = read_map(dir)?;
    let mask_path = dir.join("mask.csv");
    let mask = if mask_path.exists() {
        with_path(
            &mask_path,
            mask_read(&mask_path, (map.dims().0, map.dims().1)),
        )?
    } else {
        draw_mask(cfg, &map)?
    };
    let a = cfg.sensing.a_offset;
    let seed = Seed(cfg.seed);
    let obs = observe(&map, &mask, &cfg.effective_sensing(), seed)?;
    let r_hat = cfg.recovery_emitters();
    let solver = &cfg.solver;
    let out_dir = dir.join(cfg.method.to_string());
    create_dir(&out_dir)?;
    let start = Instant::now();
    let fitted = match cfg.method {
        Method::Proposed => {
            let arch = proposed_arch(map.dims().0, map.dims().1)?;
            recover(&obs, &arch, r_hat, solver, seed).map(|r| (r.estimate, Some(r.trace)))
        }
        Method::Naive => {
            naive_unn_recover(&obs, r_hat, solver, seed).map(|r| (r.estimate, Some(r.trace)))
        }
        Method::Idw => {
            idw_interpolate(&obs.log_estimates(), solver.idw_power, a).map(|x| (x, None))
        }
        Method::Btd => {
            let linear = obs.log_estimates().map_values(|y| h_inverse(y, a));
            btd_recover(&linear, r_hat, &solver.btd).map(|x| (x, None))
        }
    };
    let runtime_s = start.elapsed().as_secs_f64();
    let label = scenario_label(cfg);
    let (estimate, trace) = match fitted {
        Ok(v) => v,
        Err(Error::Diverged { .. }) => {
            append_metrics(
                metrics,
                &format!("{label},{},{},nan,nan,{runtime_s:.3}", cfg.seed, cfg.method),
            )?;
            return Ok(Outcome::Diverged);
        }
        Err(e) => return Err(e),
    };
    let mut files = vec!["estimate.rmt".to_string()];
    tensor_write(out_dir.join("estimate.rmt"), &estimate)?;
    if let Some(trace) = trace {
        fs::write(out_dir.join("loss.csv"), trace.to_csv())?;
        files.push("loss.csv".into());
    }
    write_manifest(&out_dir, "recover", cfg, &files)?;
    let ssim = ssim_log_avg(&map, &estimate, a)?;
    let err = nmse(&map, &estimate)?;
    append_metrics(
        metrics,
        &format!(
            "{label},{},{},{ssim},{err},{runtime_s:.3}",
            cfg.seed, cfg.method
        ),
    )?;
    Ok(Outcome::Done {
        ssim,
        nmse: err,
        runtime_s,
    })
}

/// Append one row under an exclusive lock, writing the header into an empty file.
pub fn append_metrics(path: &Path, row: &str) -> Result<()> {
    let mut f = with_path(
        path,
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(Error::from),
    )?;
    f.lock()?;
    if f.metadata()?.len() == 0 {
        writeln!(f, "{METRICS_HEADER}")?;
    }
    writeln!(f, "{row}")?;
    f.unlock()?;
    Ok(())
}

/// Score every estimate found under the trial directories.
pub fn evaluate(cfg: &ExperimentConfig, out: &Path, seeds: &[u64]) -> Result<PathBuf> {
    let path = out.join("evaluation.csv");
    let mut text = String::from("scenario,seed,method,ssim,nmse\n");
    for &s in seeds {
        let tcfg = trial_config(cfg, s);
        let dir = trial_dir(out, s);
        let map = read_map(&dir)?;
        for method in [Method::Proposed, Method::Naive, Method::Idw, Method::Btd] {
            let est_path = dir.join(method.to_string()).join("estimate.rmt");
            if !est_path.exists() {
                continue;
            }
            let est = with_path(&est_path, tensor_read(&est_path))?;
            let ssim = ssim_log_avg(&map, &est, cfg.sensing.a_offset)?;
            let _ = writeln!(
                text,
                "{},{s},{method},{ssim},{}",
                scenario_label(&tcfg),
                nmse(&map, &est)?
            );
        }
    }
    let mut f = with_path(&path, File::create(&path).map_err(Error::from))?;
    f.write_all(text.as_bytes())?;
    Ok(path)
}

/// Worker count: `RMC_THREADS` if set to a positive integer, else the machine's parallelism.
pub fn thread_cap() -> usize {
    std::env::var("RMC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Run `f` over `jobs` on at most `threads` workers; results keep job order.
pub fn run_parallel<J: Sync, T: Send>(
    jobs: &[J],
    threads: usize,
    f: impl Fn(&J) -> T + Sync,
) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            scope.spawn(|| {
                loop {
                    let idx = next.fetch_add(1, Ordering::Relaxed);
                    let Some(job) = jobs.get(idx) else { break };
                    let out = f(job);
                    results.lock().expect("no worker panicked")[idx] = Some(out);
                }
            });
        }
    });
    results
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}
