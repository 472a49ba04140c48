//! Exit-code contract and command smoke tests against the built binary.

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_soluscan"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("soluscan_cli_{tag}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn missing_input_file_exits_2_with_diagnostic() {
    let out = bin()
        .args([
            "analyze",
            "--white",
            "/no/such/white.png",
            "--check",
            "/no/such/check.png",
            "--model",
            "/no/such/model.txt",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no such file"), "{err}");
}

#[test]
fn single_fold_validation_is_a_usage_error() {
    let dir = temp_dir("folds");
    let manifest = dir.join("manifest.csv");
    std::fs::write(
        &manifest,
        "case_id,white_png,check_png,label,scenario,augmentation\n",
    )
    .unwrap();
    let out = bin()
        .args(["validate", "--manifest"])
        .arg(&manifest)
        .args(["--folds", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_rejected() {
    let out = bin()
        .args(["--set", "nonsense.key=1", "simulate", "--preset", "A", "--out", "/tmp/x"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

/// Full loop at desk scale: dataset, training, per-category verdict exit
/// codes, and the config hash on stderr.
#[test]
fn simulate_train_analyze_loop_honors_verdict_exit_codes() {
    let dir = temp_dir("loop");
    let ds = dir.join("ds");
    let small = [
        "--set",
        "crop.side=280",
        "--set",
        "sa.grid.pitch=40",
    ];
    let out = bin()
        .args(small)
        .args(["simulate", "--dataset"])
        .args(["--pass-cases", "4", "--fail1-cases", "4", "--fail2-cases", "4"])
        .args(["--frame-width", "320", "--frame-height", "320", "--seed", "9"])
        .arg("--out")
        .arg(&ds)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config hash:"));

    let model = dir.join("model.txt");
    let out = bin()
        .args(small)
        .args(["train", "--augment", "--manifest"])
        .arg(ds.join("manifest.csv"))
        .arg("--out")
        .arg(&model)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("in_sample confusion matrix"), "{stdout}");

    // Manifest rows are ordered Pass, Fail1, Fail2 by construction.
    let analyze = |case: &str| -> (Option<i32>, String) {
        let out = bin()
            .args(small)
            .args(["analyze", "--white"])
            .arg(ds.join(format!("{case}_white.png")))
            .arg("--check")
            .arg(ds.join(format!("{case}_check.png")))
            .arg("--model")
            .arg(&model)
            .output()
            .unwrap();
        (
            out.status.code(),
            String::from_utf8_lossy(&out.stdout).into_owned(),
        )
    };
    let (code, stdout) = analyze("case0000");
    assert_eq!(code, Some(0), "{stdout}");
    assert!(stdout.starts_with("Pass"), "{stdout}");
    let (code, stdout) = analyze("case0004");
    assert_eq!(code, Some(10), "{stdout}");
    assert!(stdout.starts_with("Fail1"), "{stdout}");
    let (code, stdout) = analyze("case0008");
    assert_eq!(code, Some(11), "{stdout}");
    assert!(stdout.starts_with("Fail2"), "{stdout}");

    // A preset render supplies a calibration grid; analyzing with it
    // instead of the analytic grid still reads the clear case as Pass.
    let preset = dir.join("preset");
    let out = bin()
        .args(small)
        .args(["simulate", "--preset", "A", "--seed", "9"])
        .args(["--frame-width", "320", "--frame-height", "320"])
        .arg("--out")
        .arg(&preset)
        .output()
        .unwrap();
    assert!(out.status.success());
    let out = bin()
        .args(small)
        .args(["analyze", "--white"])
        .arg(preset.join("white.png"))
        .arg("--check")
        .arg(preset.join("check.png"))
        .arg("--model")
        .arg(&model)
        .arg("--ground-truth")
        .arg(preset.join("grid.png"))
        .arg("--dump-profiles")
        .arg(dir.join("profiles.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let profiles = std::fs::read_to_string(dir.join("profiles.csv")).unwrap();
    assert!(profiles.starts_with("position,mean_intensity"));
    assert!(profiles.lines().count() > 100);

    // Validation over the same manifest prints a fold table.
    let out = bin()
        .args(small)
        .args(["validate", "--augment", "--folds", "2", "--manifest"])
        .arg(ds.join("manifest.csv"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("mean:"), "{stdout}");
}

fn spawn_listening(mut cmd: Command) -> (Child, String) {
    let mut child = cmd.stdout(Stdio::piped()).spawn().unwrap();
    let stdout = child.stdout.take().unwrap();
    let mut line = String::new();
    BufReader::new(stdout).read_line(&mut line).unwrap();
    let addr = line
        .rsplit(' ')
        .next()
        .expect("emulator prints its address")
        .trim()
        .to_string();
    (child, addr)
}

#[test]
fn serve_against_emulator_binaries_writes_records_and_trend() {
    let dir = temp_dir("serve");
    let small = ["--set", "crop.side=280"];
    let mut display_cmd = bin();
    display_cmd
        .args(small)
        .args(["emulate", "display", "--listen", "127.0.0.1:0"]);
    let (mut display, display_addr) = spawn_listening(display_cmd);
    let mut camera_cmd = bin();
    camera_cmd.args(small).args([
        "emulate",
        "camera",
        "--listen",
        "127.0.0.1:0",
        "--preset",
        "A",
        "--seed",
        "6",
        "--frame-width",
        "320",
        "--frame-height",
        "320",
    ]);
    let (mut camera, camera_addr) = spawn_listening(camera_cmd);

    // Hand-written model file: the verdict weights matter, not training.
    let model = dir.join("model.txt");
    std::fs::write(
        &model,
        "soluscan-svm v1\nc = 1\nepochs = 200\nseed = 42\n\
         means = 0 0 0 0 0\nscales = 1 1 1 1 1\n\
         class = Pass\nw = 0 0 0 -0.004 5\nb = -2.5\n\
         class = Fail1\nw = 0 0 0 0 -5\nb = 1\n\
         class = Fail2\nw = 0 0 0 0.004 0\nb = -1\n",
    )
    .unwrap();

    let records = dir.join("records");
    let out = bin()
        .args(small)
        .args(["serve", "--display", &display_addr, "--camera", &camera_addr])
        .args(["--count", "2", "--svg", "--model"])
        .arg(&model)
        .arg("--out")
        .arg(&records)
        .output()
        .unwrap();
    let _ = display.kill();
    let _ = camera.kill();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(records.join("trend.csv").exists());
    assert!(records.join("trend.svg").exists());
    assert!(records.join("session-0000").join("record.json").exists());
    assert!(records.join("session-0001").join("white.png").exists());
    let trend = std::fs::read_to_string(records.join("trend.csv")).unwrap();
    assert_eq!(trend.lines().count(), 3);
    assert!(Path::new(&records).join("session-0000").join("check.png").exists());
}
