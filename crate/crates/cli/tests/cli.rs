//! End-to-end checks of the binary: exit codes, subcommand output, and the
//! output-directory conventions.

use std::path::Path;
use std::process::Command;

fn latentwalk() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latentwalk"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const GOOD_CONFIG: &str = "
[map]
kind = \"affine\"
dim = 2

[operator]
kind = \"inpaint\"

[sampler]
n_steps = 50
warm_steps = 5
burn_in = 10
thinning = 2
seed = 3
";

#[test]
fn unknown_suite_is_a_usage_error() {
    let out = latentwalk().args(["verify", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown suite"), "{stderr}");
}

#[test]
fn config_with_typo_exits_2_and_suggests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    write(&cfg, &format!("{GOOD_CONFIG}\n[sampler2]\nx = 1\n"));
    let out = latentwalk().arg("sample").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("sampler"), "{stderr}");
}

#[test]
fn missing_config_file_exits_2() {
    let out = latentwalk()
        .args(["sample", "/nonexistent/config.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn all_diverged_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("diverge.toml");
    write(
        &cfg,
        "
[map]
kind = \"affine\"
dim = 1
matrix = [40.0]

[operator]
kind = \"inpaint\"

[measurement]
sigma = 0.1
ground_truth = [0.0]

[sampler]
tau = 0.9
n_steps = 400
warm_steps = 0
burn_in = 0
thinning = 1
seed = 1
",
    );
    let out = latentwalk()
        .arg("sample")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    // The summary still records the divergence flags.
    let summary: serde_json::Value = serde_json::from_slice(
        &std::fs::read(dir.path().join("out").join("summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["chains"][0]["diverged"], true);
}

#[test]
fn sample_honors_output_root_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    write(&cfg, GOOD_CONFIG);
    let root = dir.path().join("root");
    let out = latentwalk()
        .arg("sample")
        .arg(&cfg)
        .env("LATENTWALK_OUT", &root)
        .output()
        .unwrap();
    assert!(out.status.success(), "{out:?}");
    assert!(root.join("exp").join("samples.csv").exists());
    assert!(root.join("exp").join("config.toml").exists());
    assert!(root.join("exp").join("summary.json").exists());
}

#[test]
fn nfe_subcommand_prints_the_curve() {
    let out = latentwalk()
        .args(["nfe", "--eta", "1", "--warm", "800", "--steps", "1", "10", "100"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout, "n,nfe_per_sample\n1,801\n10,81\n100,9\n");
}

#[test]
fn metrics_subcommand_reads_back_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    write(&cfg, GOOD_CONFIG);
    let out_dir = dir.path().join("out");
    let run = latentwalk()
        .arg("sample")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(run.status.success());
    let metrics = latentwalk()
        .arg("metrics")
        .arg(out_dir.join("samples.csv"))
        .output()
        .unwrap();
    assert!(metrics.status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&metrics.stdout).expect("metrics prints JSON");
    assert_eq!(report["samples"], 20);
    assert_eq!(report["dim"], 2);
}

#[test]
fn pgm_toggle_writes_images() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("img.toml");
    write(
        &cfg,
        "
[map]
kind = \"mlp\"
dim = 16
seed = 4

[operator]
kind = \"avgpool\"
width = 4
factor = 2

[sampler]
n_steps = 30
warm_steps = 5
burn_in = 0
thinning = 1
seed = 9

[metrics]
pgm = true
",
    );
    let out_dir = dir.path().join("out");
    let run = latentwalk()
        .arg("sample")
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(run.status.success(), "{run:?}");
    let pgm = std::fs::read(out_dir.join("sample_chain0.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n4 4\n255\n"));
    assert_eq!(pgm.len(), "P5\n4 4\n255\n".len() + 16);
}

#[test]
fn verify_nfe_suite_passes_from_the_cli() {
    let out = latentwalk().args(["verify", "nfe"]).output().unwrap();
    assert!(out.status.success(), "{out:?}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[PASS] nfe/curve_exact"), "{stdout}");
}
