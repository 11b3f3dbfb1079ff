mod bound;
mod error;
mod pipeline;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rmc_core::Error;
use rmc_core::config::ExperimentConfig;

use crate::error::{CliError, CliResult};
use crate::pipeline::{Outcome, run_parallel, thread_cap, trial_config, trial_dir};

/// Radio map recovery experiments.
#[derive(Parser)]
#[command(name = "rmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw ground-truth maps, SLFs and PSDs for each trial seed.
    Generate(Common),
    /// Draw sensor locations and write the sensor reports.
    Sample(Common),
    /// Run the configured method and append metrics rows.
    Recover(Common),
    /// Score every estimate against its ground truth.
    Evaluate(Common),
    /// Evaluate the covering-number and rate expressions over a grid.
    Bound(BoundArgs),
    /// Generate, sample and recover across a grid of one config key.
    Sweep(SweepArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// key = value config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// proposed, naive, idw or btd
    #[arg(long)]
    method: Option<String>,
    /// Quantizer bits; 0 for full precision
    #[arg(long, value_name = "B")]
    quantized: Option<u32>,
    /// Number of consecutive trial seeds starting at the base seed
    #[arg(long, value_name = "N")]
    trials: Option<u64>,
}

#[derive(Args)]
struct BoundArgs {
    /// Grid file, `key = v1, v2, ...` per line
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Config key and its values, e.g. `R=1,2,4`
    #[arg(long, value_name = "KEY=V1,V2,...")]
    vary: String,
    /// Comma-separated methods; defaults to the configured one
    #[arg(long)]
    methods: Option<String>,
}

fn load_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path).map_err(|e| match e {
            Error::Io(io) => Error::Io(std::io::Error::new(
                io.kind(),
                format!("{}: {io}", path.display()),
            )),
            other => other,
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(m) = &common.method {
        cfg.set("method", m)?;
    }
    if let Some(b) = common.quantized {
        cfg.set("B", &b.to_string())?;
    }
    if let Some(n) = common.trials {
        if n == 0 {
            return Err(Error::Config("--trials must be positive".into()).into());
        }
        cfg.trials = (0..n).map(|t| cfg.seed + t).collect();
    }
    cfg.validate()?;
    pipeline::check_runnable(&cfg)?;
    Ok(cfg)
}

fn create_out(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", out.display()),
        ))
    })?;
    Ok(())
}

fn per_trial(
    cfg: &ExperimentConfig,
    out: &Path,
    stage: fn(&ExperimentConfig, &Path) -> rmc_core::Result<()>,
) -> CliResult<()> {
    create_out(out)?;
    let seeds = cfg.trial_seeds();
    let results = run_parallel(&seeds, thread_cap(), |&s| {
        stage(&trial_config(cfg, s), &trial_dir(out, s))
    });
    for r in results {
        r?;
    }
    Ok(())
}

/// Fails only when every recovery diverged.
fn summarize(outcomes: Vec<rmc_core::Result<Outcome>>) -> CliResult<()> {
    let total = outcomes.len();
    let mut diverged = 0;
    let mut sums = [0.0; 3];
    for o in outcomes {
        match o? {
            Outcome::Diverged => diverged += 1,
            Outcome::Done {
                ssim,
                nmse,
                runtime_s,
            } => {
                sums[0] += ssim;
                sums[1] += nmse;
                sums[2] += runtime_s;
            }
        }
    }
    if total > diverged {
        let done = (total - diverged) as f64;
        println!(
            "{} recoveries: mean ssim {:.4}, mean nmse {:.4e}, mean runtime {:.2} s",
            total - diverged,
            sums[0] / done,
            sums[1] / done,
            sums[2] / done
        );
    }
    if diverged > 0 {
        eprintln!("{diverged} of {total} recoveries diverged");
    }
    if total > 0 && diverged == total {
        return Err(CliError::AllDiverged(total));
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Generate(common) => {
            let cfg = load_config(&common)?;
            per_trial(&cfg, &common.out, pipeline::generate_trial)
        }
        Command::Sample(common) => {
            let cfg = load_config(&common)?;
            per_trial(&cfg, &common.out, pipeline::sample_trial)
        }
        Command::Recover(common) => {
            let cfg = load_config(&common)?;
            create_out(&common.out)?;
            let metrics = common.out.join("metrics.csv");
            let seeds = cfg.trial_seeds();
            let outcomes = run_parallel(&seeds, thread_cap(), |&s| {
                pipeline::recover_trial(
                    &trial_config(&cfg, s),
                    &trial_dir(&common.out, s),
                    &metrics,
                )
            });
            summarize(outcomes)
        }
        Command::Evaluate(common) => {
            let cfg = load_config(&common)?;
            let path = pipeline::evaluate(&cfg, &common.out, &cfg.trial_seeds())?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Bound(args) => {
            let text = fs::read_to_string(&args.config).map_err(|e| {
                Error::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", args.config.display()),
                ))
            })?;
            let grid = bound::parse_grid(&text)?;
            create_out(&args.out)?;
            let path = args.out.join("bounds.csv");
            fs::write(&path, bound::evaluate_grid(&grid)).map_err(Error::from)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Sweep(args) => sweep(&args),
    }
}

fn sweep(args: &SweepArgs) -> CliResult<()> {
    let base = load_config(&args.common)?;
    let (key, values) = args.vary.split_once('=').ok_or_else(|| {
        Error::Config(format!("--vary expects KEY=V1,V2,..., got {:?}", args.vary))
    })?;
    let key = key.trim();
    let methods: Vec<String> = match &args.methods {
        Some(list) => list.split(',').map(|m| m.trim().to_string()).collect(),
        None => vec![base.method.to_string()],
    };
    let mut points = Vec::new();
    for value in values.split(',').map(str::trim) {
        let mut cfg = base.clone();
        cfg.set(key, value)?;
        for m in &methods {
            let mut check = cfg.clone();
            check.set("method", m)?;
            check.validate()?;
            pipeline::check_runnable(&check)?;
        }
        points.push((args.common.out.join(format!("{key}-{value}")), cfg));
    }
    create_out(&args.common.out)?;
    let metrics = args.common.out.join("metrics.csv");
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| base.trial_seeds().into_iter().map(move |s| (p, s)))
        .collect();
    let outcomes = run_parallel(
        &jobs,
        thread_cap(),
        |&(p, s)| -> rmc_core::Result<Vec<Outcome>> {
            let (out, cfg) = &points[p];
            let mut cfg = trial_config(cfg, s);
            let dir = trial_dir(out, s);
            pipeline::generate_trial(&cfg, &dir)?;
            pipeline::sample_trial(&cfg, &dir)?;
            let mut done = Vec::new();
            for m in &methods {
                cfg.set("method", m)?;
                done.push(pipeline::recover_trial(&cfg, &dir, &metrics)?);
            }
            Ok(done)
        },
    );
    let mut flat = Vec::new();
    for o in outcomes {
        flat.extend(o?.into_iter().map(Ok));
    }
    summarize(flat)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rmc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
