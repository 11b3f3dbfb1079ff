use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rmc_core::analysis::{BoundParams, cover_bound_xunn};
use rmc_core::io::tensor_read;

const SMALL: &str = "I = 32\nJ = 32\nK = 8\nR = 2\nrestarts = 1\nmax_iter = 40\nwarm_steps = 20\n";

fn rmc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.txt"), config).unwrap();
    dir
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn generate_default_scenario_layout() {
    let dir = tempfile::tempdir().unwrap();
    ok(rmc(&["generate", "--out", "o"], dir.path()));
    let seed_dir = dir.path().join("o/seed-0");
    assert_eq!(
        tensor_read(seed_dir.join("map.rmt")).unwrap().dims(),
        (64, 64, 64)
    );
    for r in 0..4 {
        assert_eq!(
            tensor_read(seed_dir.join(format!("slf-{r}.rmt")))
                .unwrap()
                .dims(),
            (64, 64, 1)
        );
    }
    assert!(!seed_dir.join("slf-4.rmt").exists());
    let psd = fs::read_to_string(seed_dir.join("psd.csv")).unwrap();
    assert_eq!(psd.lines().next().unwrap(), "k,c0,c1,c2,c3");
    assert_eq!(psd.lines().count(), 65);
    let manifest = fs::read_to_string(seed_dir.join("generate.manifest")).unwrap();
    assert!(manifest.contains("# seed = 0\n"));
    assert!(manifest.contains("# config_hash = "));
}

#[test]
fn generate_is_bit_reproducible() {
    let dir = setup(SMALL);
    ok(rmc(
        &["generate", "--config", "c.txt", "--seed", "7", "--out", "a"],
        dir.path(),
    ));
    ok(rmc(
        &["generate", "--config", "c.txt", "--seed", "7", "--out", "b"],
        dir.path(),
    ));
    for f in [
        "map.rmt",
        "slf-0.rmt",
        "slf-1.rmt",
        "psd.csv",
        "emitters.csv",
        "generate.manifest",
    ] {
        let a = fs::read(dir.path().join("a/seed-7").join(f)).unwrap();
        let b = fs::read(dir.path().join("b/seed-7").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    ok(rmc(
        &["generate", "--config", "c.txt", "--seed", "8", "--out", "a"],
        dir.path(),
    ));
    assert_ne!(
        fs::read(dir.path().join("a/seed-7/map.rmt")).unwrap(),
        fs::read(dir.path().join("a/seed-8/map.rmt")).unwrap()
    );
}

#[test]
fn idw_trials_produce_metric_rows() {
    let dir = setup(SMALL);
    ok(rmc(
        &[
            "generate", "--config", "c.txt", "--trials", "5", "--out", "o",
        ],
        dir.path(),
    ));
    ok(rmc(
        &["sample", "--config", "c.txt", "--trials", "5", "--out", "o"],
        dir.path(),
    ));
    ok(rmc(
        &[
            "recover", "--config", "c.txt", "--trials", "5", "--method", "idw", "--out", "o",
        ],
        dir.path(),
    ));
    let metrics = fs::read_to_string(dir.path().join("o/metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,seed,method,ssim,nmse,runtime_s"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    let mut seeds: Vec<u64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    seeds.sort();
    assert_eq!(seeds, vec![0, 1, 2, 3, 4]);
    for r in &rows {
        assert_eq!(r[2], "idw");
        let ssim: f64 = r[3].parse().unwrap();
        assert!((-1.0..=1.0).contains(&ssim));
    }
    ok(rmc(
        &[
            "evaluate", "--config", "c.txt", "--trials", "5", "--out", "o",
        ],
        dir.path(),
    ));
    let eval = fs::read_to_string(dir.path().join("o/evaluation.csv")).unwrap();
    assert_eq!(eval.lines().count(), 6);
}

#[test]
fn quantized_recovery_uses_quantized_likelihood() {
    let dir = setup(SMALL);
    ok(rmc(
        &["generate", "--config", "c.txt", "--out", "o"],
        dir.path(),
    ));
    ok(rmc(
        &[
            "recover",
            "--config",
            "c.txt",
            "--quantized",
            "3",
            "--out",
            "o",
        ],
        dir.path(),
    ));
    let trace = fs::read_to_string(dir.path().join("o/seed-0/proposed/loss.csv")).unwrap();
    assert!(trace.starts_with("# loss=quantized\n"));
    ok(rmc(
        &["recover", "--config", "c.txt", "--out", "o"],
        dir.path(),
    ));
    let trace = fs::read_to_string(dir.path().join("o/seed-0/proposed/loss.csv")).unwrap();
    assert!(trace.starts_with("# loss=fp\n"));
}

#[test]
fn exit_codes() {
    let dir = setup("colour = red\n");
    assert_eq!(
        rmc(&["recover", "--config", "c.txt"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        rmc(&["recover", "--method", "magic"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        rmc(&["recover", "--config", "absent.txt"], dir.path())
            .status
            .code(),
        Some(3)
    );

    let dir = setup("I = 20\nJ = 20\nK = 4\nR = 1\n");
    assert_eq!(
        rmc(&["recover", "--config", "c.txt"], dir.path())
            .status
            .code(),
        Some(2)
    );

    let dir = setup(SMALL);
    assert_eq!(
        rmc(&["recover", "--config", "c.txt", "--out", "o"], dir.path())
            .status
            .code(),
        Some(3)
    );

    let dir = setup("I = 32\nJ = 32\nK = 8\nR = 1\nrestarts = 2\nlr_unn = 1e300\n");
    ok(rmc(
        &[
            "generate", "--config", "c.txt", "--trials", "2", "--out", "o",
        ],
        dir.path(),
    ));
    let out = rmc(
        &[
            "recover", "--config", "c.txt", "--trials", "2", "--out", "o",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));
    let metrics = fs::read_to_string(dir.path().join("o/metrics.csv")).unwrap();
    assert_eq!(
        metrics.lines().filter(|l| l.contains(",nan,nan,")).count(),
        2
    );
}

#[test]
fn bound_grid_passthrough_and_sweeps() {
    let dir = setup("R = 2\nepsilon = 0.25\nK = 16\nN = 50\n");
    ok(rmc(
        &["bound", "--config", "c.txt", "--out", "b"],
        dir.path(),
    ));
    let csv = fs::read_to_string(dir.path().join("b/bounds.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let p = BoundParams {
        emitters: 2.0,
        epsilon: 0.25,
        bins: 16.0,
        samples: 50.0,
        ..BoundParams::default()
    };
    assert_eq!(
        row[col("log_cover_xunn")].parse::<f64>().unwrap(),
        cover_bound_xunn(&p).unwrap()
    );

    let dir = setup("N = 10, 20, 40, 80, 160\n");
    ok(rmc(
        &["bound", "--config", "c.txt", "--out", "b"],
        dir.path(),
    ));
    let csv = fs::read_to_string(dir.path().join("b/bounds.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let t1 = header.iter().position(|h| *h == "term1_fp").unwrap();
    let vals: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(t1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(vals.len(), 5);
    assert!(vals.windows(2).all(|w| w[1] < w[0]));

    let dir = setup("epsilon = -1, 0.01, 0.1, 1, 10\nW = 6\nL = 4\n");
    ok(rmc(
        &["bound", "--config", "c.txt", "--out", "b"],
        dir.path(),
    ));
    let csv = fs::read_to_string(dir.path().join("b/bounds.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let xc = header.iter().position(|h| *h == "log_cover_xunn").unwrap();
    let err = header.iter().position(|h| *h == "error").unwrap();
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    let finite: Vec<f64> = rows
        .iter()
        .filter(|r| r[err].is_empty())
        .map(|r| r[xc].parse().unwrap())
        .collect();
    assert!(finite.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(finite.len(), 4);
    assert!(rows[0][err].contains("cover radius"));
}

#[test]
fn sweep_writes_every_point_under_parallel_trials() {
    let dir = setup(SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_rmc"))
        .args([
            "sweep",
            "--config",
            "c.txt",
            "--trials",
            "3",
            "--out",
            "s",
            "--vary",
            "R=1,2",
            "--methods",
            "idw,btd",
        ])
        .env("RMC_THREADS", "3")
        .current_dir(dir.path())
        .output()
        .unwrap();
    ok(out);
    let metrics = fs::read_to_string(dir.path().join("s/metrics.csv")).unwrap();
    let rows: Vec<&str> = metrics.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 3 * 2);
    assert!(rows.iter().all(|r| r.split(',').count() == 6));
    assert_eq!(
        metrics
            .lines()
            .filter(|l| l.starts_with("scenario,"))
            .count(),
        1
    );
    assert!(dir.path().join("s/R-2/seed-2/btd/estimate.rmt").exists());
    assert_eq!(rows.iter().filter(|r| r.starts_with("R1_")).count(), 6);

    let bad = rmc(
        &[
            "sweep", "--config", "c.txt", "--out", "s", "--vary", "nope=1",
        ],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn recover_manifest_rerun_is_bit_exact() {
    let dir = setup(SMALL);
    ok(rmc(
        &["generate", "--config", "c.txt", "--seed", "3", "--out", "a"],
        dir.path(),
    ));
    ok(rmc(
        &["recover", "--config", "c.txt", "--seed", "3", "--out", "a"],
        dir.path(),
    ));
    let manifest = dir.path().join("a/seed-3/proposed/recover.manifest");
    let m = manifest.to_str().unwrap();
    ok(rmc(&["generate", "--config", m, "--out", "b"], dir.path()));
    ok(rmc(&["recover", "--config", m, "--out", "b"], dir.path()));
    for f in ["estimate.rmt", "loss.csv", "recover.manifest"] {
        assert_eq!(
            fs::read(dir.path().join("a/seed-3/proposed").join(f)).unwrap(),
            fs::read(dir.path().join("b/seed-3/proposed").join(f)).unwrap(),
            "{f}"
        );
    }
}
