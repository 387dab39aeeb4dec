//! End-to-end tests for the `krp` binary: exit codes, determinism of
//! seeded runs, and smoke coverage of every subcommand.

use std::path::Path;
use std::process::{Command, Output};

use krp::apps::era::{random_stable_system, simulate_markov};
use krp::tensor::DenseTensor;
use krp_cli::io;

fn krp_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_krp"))
}

fn run_ok(args: &[&str]) -> String {
    let out = krp_bin().args(args).output().expect("spawn krp");
    assert!(
        out.status.success(),
        "krp {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn run_err(args: &[&str]) -> Output {
    krp_bin().args(args).output().expect("spawn krp")
}

/// CSV data row of a report printed to stdout, with the elapsed column
/// stripped.
fn csv_row_no_elapsed(stdout: &str) -> String {
    let row = stdout.lines().nth(1).expect("csv data row");
    let (head, _elapsed) = row.rsplit_once(',').expect("elapsed column");
    head.to_string()
}

fn rel_error_field(stdout: &str) -> f64 {
    let row = stdout.lines().nth(1).expect("csv data row");
    row.split(',').nth(5).expect("rel_error column").parse().expect("parse rel_error")
}

#[test]
fn usage_errors_exit_2() {
    let out = run_err(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));

    // Rank count mismatch on a known-good input.
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.kten");
    run_ok(&["gen-cauchy", "--dims", "6,6,6", "--out", x.to_str().unwrap()]);
    let out = run_err(&["hosvd", "--in", x.to_str().unwrap(), "--ranks", "2,2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn io_errors_exit_3() {
    let out = run_err(&["hosvd", "--in", "/nonexistent/x.kten", "--ranks", "2"]);
    assert_eq!(out.status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.kten");
    std::fs::write(&bad, b"not a tensor").unwrap();
    let out = run_err(&["hosvd", "--in", bad.to_str().unwrap(), "--ranks", "2"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bounds_solves_and_reports_infeasibility() {
    let stdout =
        run_ok(&["bounds", "--variant", "rrf", "--r", "10", "--d", "3", "--delta", "0.01"]);
    let ell: u64 = stdout
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("ell = "))
        .expect("ell line")
        .parse()
        .expect("integer ell");
    assert!(ell > 10);

    let stdout = run_ok(&["bounds", "--variant", "single-view", "--r", "5", "--d", "2"]);
    assert!(stdout.contains("ell = "));
    assert!(stdout.contains("ell_left = "));

    // Column cap 16 cannot hold the required sample size.
    let out = run_err(&["bounds", "--variant", "rrf", "--r", "10", "--dims", "4,4"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn embed_check_reports_frequency() {
    let stdout = run_ok(&[
        "embed-check", "--r", "2", "--dims", "8,8", "--ell", "64", "--eps", "0.5", "--trials",
        "10", "--seed", "3",
    ]);
    let freq: f64 = stdout
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("frequency = "))
        .expect("frequency line")
        .parse()
        .expect("parse frequency");
    assert!((0.0..=1.0).contains(&freq));
}

#[test]
fn compression_run_is_deterministic_and_accurate() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.kten");
    run_ok(&["gen-cauchy", "--n", "12", "--d", "4", "--alpha", "2", "--out", x.to_str().unwrap()]);

    let args = |report: &Path| {
        vec![
            "rhosvd-krp".to_string(),
            "--in".into(),
            x.to_str().unwrap().into(),
            "--ranks".into(),
            "4".into(),
            "--oversample".into(),
            "1".into(),
            "--seed".into(),
            "7".into(),
            "--report".into(),
            report.to_str().unwrap().into(),
        ]
    };
    let r1 = dir.path().join("r1.csv");
    let r2 = dir.path().join("r2.csv");
    let out1 = run_ok(&args(&r1).iter().map(String::as_str).collect::<Vec<_>>());
    let out2 = run_ok(&args(&r2).iter().map(String::as_str).collect::<Vec<_>>());

    // Identical rows up to the elapsed column, on stdout and on disk.
    assert_eq!(csv_row_no_elapsed(&out1), csv_row_no_elapsed(&out2));
    let file_row = |p: &Path| {
        let text = std::fs::read_to_string(p).unwrap();
        csv_row_no_elapsed(&text)
    };
    assert_eq!(file_row(&r1), csv_row_no_elapsed(&out1));
    assert_eq!(file_row(&r1), file_row(&r2));

    // JSON sidecars match after dropping the elapsed field.
    let sidecar = |p: &Path| {
        let text = std::fs::read_to_string(p.with_extension("json")).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v.as_object_mut().unwrap().remove("elapsed_s").expect("elapsed_s present");
        v
    };
    assert_eq!(sidecar(&r1), sidecar(&r2));

    let rel = rel_error_field(&out1);
    assert!(rel > 0.0 && rel < 1.0, "rel_error {rel} out of range");
}

#[test]
fn compression_writes_readable_tucker_output() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.kten");
    let z = dir.path().join("z.ktuk");
    run_ok(&["gen-cauchy", "--dims", "10,9,8", "--out", x.to_str().unwrap()]);
    let stdout = run_ok(&[
        "rsthosvd-krp",
        "--in",
        x.to_str().unwrap(),
        "--ranks",
        "4",
        "--oversample",
        "1",
        "--seed",
        "3",
        "--out",
        z.to_str().unwrap(),
    ]);
    let t = io::read_tucker(&z).unwrap();
    assert_eq!(t.dims(), vec![10, 9, 8]);
    // Randomized variants keep the oversampled core size ell = r + p.
    assert_eq!(t.ranks(), vec![5, 5, 5]);

    // Reported error matches the stored decomposition.
    let input = io::read_tensor(&x).unwrap();
    let rec = t.reconstruct().unwrap();
    let rel = input.sub(&rec).fro_norm() / input.fro_norm();
    assert!((rel - rel_error_field(&stdout)).abs() <= 1e-12 * (1.0 + rel));
}

#[test]
fn era_identifies_synthetic_system() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c, d) = random_stable_system(3, 2, 4, 0.9, 42).unwrap();
    let seq = simulate_markov(&a, &b, &c, &d, 12).unwrap();
    let (m, n) = seq.block_shape();
    let t = seq.blocks().len();
    let mut data = vec![0.0f64; m * n * t];
    for (k, blk) in seq.blocks().iter().enumerate() {
        for j in 0..n {
            for i in 0..m {
                data[i + m * j + m * n * k] = blk.get(i, j);
            }
        }
    }
    let x = DenseTensor::from_data(&[m, n, t], data);
    let path = dir.path().join("markov.kten");
    io::write_tensor(&path, &x).unwrap();

    // Exact-order identification reproduces the Markov parameters.
    for (method, tol) in [("dense-svd", 1e-10), ("krp-single-view", 1e-8)] {
        let stdout = run_ok(&[
            "era",
            "--markov-in",
            path.to_str().unwrap(),
            "--r",
            "4",
            "--oversample",
            "2",
            "--method",
            method,
            "--seed",
            "9",
        ]);
        let rel = rel_error_field(&stdout);
        assert!(rel < tol, "{method} rel {rel}");
    }
}

#[test]
fn sensors_train_then_reconstruct_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("flow.kten");
    let model = dir.path().join("model.json");
    let rec = dir.path().join("rec.kten");
    run_ok(&["gen-cauchy", "--dims", "12,10,8", "--out", x.to_str().unwrap()]);
    let train_out = run_ok(&[
        "sensors",
        "train",
        "--in",
        x.to_str().unwrap(),
        "--ranks",
        "4",
        "--compressor",
        "rsthosvd-krp",
        "--seed",
        "11",
        "--model-out",
        model.to_str().unwrap(),
    ]);
    let recon_out = run_ok(&[
        "sensors",
        "reconstruct",
        "--model",
        model.to_str().unwrap(),
        "--in",
        x.to_str().unwrap(),
        "--out",
        rec.to_str().unwrap(),
    ]);

    // Reconstructing the training snapshots reproduces the training
    // residual, and the written field matches the reported error.
    let train_rel = rel_error_field(&train_out);
    let recon_rel = rel_error_field(&recon_out);
    assert!((train_rel - recon_rel).abs() <= 1e-9 * (1.0 + train_rel));
    let input = io::read_tensor(&x).unwrap();
    let written = io::read_tensor(&rec).unwrap();
    let rel = input.sub(&written).fro_norm() / input.fro_norm();
    assert!((rel - recon_rel).abs() <= 1e-12 * (1.0 + rel));
}

#[test]
fn hadamard_recompress_matches_dense_product() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = ["a", "b"].iter().map(|s| dir.path().join(format!("{s}.kten"))).collect();
    let ktuks: Vec<_> = ["a", "b"].iter().map(|s| dir.path().join(format!("{s}.ktuk"))).collect();
    for (i, alpha) in ["1.5", "3.0"].iter().enumerate() {
        run_ok(&[
            "gen-cauchy", "--dims", "10,10,10", "--alpha", alpha, "--out",
            paths[i].to_str().unwrap(),
        ]);
        run_ok(&[
            "hosvd",
            "--in",
            paths[i].to_str().unwrap(),
            "--ranks",
            "5",
            "--out",
            ktuks[i].to_str().unwrap(),
        ]);
    }
    let stdout = run_ok(&[
        "hadamard-recompress",
        "--x",
        ktuks[0].to_str().unwrap(),
        "--y",
        ktuks[1].to_str().unwrap(),
        "--ranks",
        "8",
        "--oversample",
        "2",
        "--seed",
        "5",
    ]);
    let rel = rel_error_field(&stdout);
    assert!(rel < 1e-10, "hadamard rel {rel}");
}
