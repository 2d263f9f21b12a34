//! Drive the installed binary: subcommands, file outputs, exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_laneintrude"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("laneintrude_cli_{tag}_{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn ok(output: &Output) {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn small_dataset(dir: &Path) -> PathBuf {
    let data = dir.join("data.jsonl");
    let out = bin()
        .args([
            "generate",
            "--out",
            data.to_str().unwrap(),
            "--n-per-class",
            "4",
            "--dataset-seed",
            "21",
        ])
        .output()
        .unwrap();
    ok(&out);
    data
}

#[test]
fn generate_is_deterministic_and_balanced() {
    let dir = workdir("gen");
    let data = small_dataset(&dir);
    let bytes_a = fs::read(&data).unwrap();
    assert_eq!(bytes_a.iter().filter(|&&b| b == b'\n').count(), 12);

    // identical seed, identical bytes
    let again = dir.join("again.jsonl");
    let out = bin()
        .args([
            "generate",
            "--out",
            again.to_str().unwrap(),
            "--n-per-class",
            "4",
            "--dataset-seed",
            "21",
        ])
        .output()
        .unwrap();
    ok(&out);
    assert_eq!(bytes_a, fs::read(&again).unwrap());

    // manifest written with the input-free config
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("data.jsonl.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "generate");
    assert_eq!(manifest["config"]["dataset"]["n_per_class"], 4);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn preprocess_emits_the_series_schema() {
    let dir = workdir("prep");
    let data = small_dataset(&dir);
    let series_dir = dir.join("series");
    let out = bin()
        .args([
            "preprocess",
            "--data",
            data.to_str().unwrap(),
            "--out-dir",
            series_dir.to_str().unwrap(),
            "--sample",
            "0",
        ])
        .output()
        .unwrap();
    ok(&out);
    let csv = fs::read_to_string(series_dir.join("sample_0000.csv")).unwrap();
    assert!(csv.starts_with("frame_index,p_r,u_o,u_1,u_2\n"));
    assert!(csv.lines().count() > 24);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn train_eval_and_plot_round_trip() {
    let dir = workdir("train");
    let data = small_dataset(&dir);
    let model = dir.join("model.json");
    let loss = dir.join("loss.csv");
    let out = bin()
        .args([
            "train",
            "--data",
            data.to_str().unwrap(),
            "--model-out",
            model.to_str().unwrap(),
            "--loss-out",
            loss.to_str().unwrap(),
            "--epochs",
            "30",
        ])
        .output()
        .unwrap();
    ok(&out);
    assert!(model.exists());
    let loss_text = fs::read_to_string(&loss).unwrap();
    assert!(loss_text.starts_with("fold,epoch,total,cross_entropy"));

    // training-set evaluation of a memorizing model
    let metrics = dir.join("metrics.csv");
    let out = bin()
        .args([
            "eval",
            "--data",
            data.to_str().unwrap(),
            "--model",
            model.to_str().unwrap(),
            "--metrics-out",
            metrics.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("accuracy"), "{stdout}");
    assert!(fs::read_to_string(&metrics)
        .unwrap()
        .starts_with("n,correct,failed,accuracy_pct\n"));

    let svg = dir.join("loss.svg");
    let out = bin()
        .args([
            "plot",
            "--input",
            loss.to_str().unwrap(),
            "--x-col",
            "epoch",
            "--y-col",
            "total",
            "--out",
            svg.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    ok(&out);
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn crossval_writes_metrics_and_respects_config_file() {
    let dir = workdir("cv");
    let data = small_dataset(&dir);
    let cfg_path = dir.join("cfg.json");
    fs::write(
        &cfg_path,
        r#"{"train": {"epochs": 6, "seed": 3}, "pipeline": {"stride": 4}}"#,
    )
    .unwrap();
    let metrics = dir.join("m.csv");
    let out = bin()
        .args([
            "crossval",
            "--data",
            data.to_str().unwrap(),
            "--k",
            "3",
            "--config",
            cfg_path.to_str().unwrap(),
            "--metrics-out",
            metrics.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    ok(&out);
    let text = fs::read_to_string(&metrics).unwrap();
    assert!(text.starts_with("fold,accuracy_pct\n"));
    assert!(text.contains("\nmean,"));
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.join("m.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["config"]["train"]["epochs"], 6);
    assert_eq!(manifest["config"]["pipeline"]["stride"], 4);
    // dataset hash recorded
    assert!(manifest["inputs"][data.to_str().unwrap()]
        .as_str()
        .unwrap()
        .len()
        == 64);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn exit_codes_distinguish_config_and_data_errors() {
    let dir = workdir("codes");
    // config error: invalid field value
    let out = bin()
        .args(["generate", "--out", "/dev/null", "--lane-width-m=-1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // config error: malformed config file
    let bad_cfg = dir.join("bad.json");
    fs::write(&bad_cfg, "{ nope").unwrap();
    let out = bin()
        .args([
            "crossval",
            "--data",
            "x.jsonl",
            "--config",
            bad_cfg.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // data error: missing dataset
    let out = bin()
        .args(["crossval", "--data", "/nonexistent/data.jsonl"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // data error: malformed dataset
    let bad_data = dir.join("bad.jsonl");
    fs::write(&bad_data, "garbage\n").unwrap();
    let out = bin()
        .args(["crossval", "--data", bad_data.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    fs::remove_dir_all(&dir).ok();
}
