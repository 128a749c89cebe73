use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_uot-rfm");

const TINY: &str = r#"{
  "version": 1,
  "dataset": {"preset": "two_mode_0.1"},
  "n_train": 300,
  "n_test": 200,
  "train": {
    "batch_size": 32,
    "iterations": 10,
    "model": {"hidden": [16, 16]}
  },
  "solver": {"method": "rk4", "n_steps": 8},
  "eval": {
    "n_gen": 150,
    "n_real": 100,
    "knn_k": 3,
    "bpd_per_class": 3,
    "bpd_solver": {"method": "rk4", "n_steps": 8},
    "score_batches": 1
  }
}"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn error_kind(out: &Output) -> String {
    let line = String::from_utf8_lossy(&out.stderr);
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap_or_else(|_| panic!("not JSON: {line}"));
    v["error"]["kind"].as_str().unwrap().to_string()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn every_subcommand_succeeds_and_prints_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out_dir = dir.path().join("run");
    let out = out_dir.display().to_string();
    for cmd in ["gen-data", "train", "sample", "eval", "plot"] {
        let o = run(&[cmd, "--config", &cfg, "--out", &out, "--seed", "5"]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        let printed = String::from_utf8(o.stdout).unwrap();
        assert!(Path::new(printed.trim()).is_file(), "{cmd} printed {printed}");
    }
    let ckpt = out_dir.join("model.ckpt").display().to_string();
    let other = dir.path().join("other").display().to_string();
    let o = run(&["sample", "--config", &cfg, "--out", &other, "--checkpoint", &ckpt]);
    assert!(o.status.success());
    assert!(Path::new(&other).join("samples.csv").is_file());
    assert!(out_dir.join("plots/scatter.svg").is_file());
}

#[test]
fn sweep_subcommand_writes_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let text = TINY.replacen("\"version\": 1,", "\"version\": 1, \"sweep\": {\"ks\": [0, 1]},", 1);
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("sweep").display().to_string();
    let o = run(&["sweep", "--config", &cfg, "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(Path::new(&out).join("sweep.csv")).unwrap();
    assert_eq!(r.records().count(), 2);
}

#[test]
fn failures_exit_nonzero_with_a_json_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x").display().to_string();

    let o = run(&["train", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_kind(&o), "io");

    let bad = write_config(
        dir.path(),
        r#"{"version": 1, "dataset": {"preset": "two_mode"}, "bogus": true}"#,
    );
    let o = run(&["gen-data", "--config", &bad, "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_kind(&o), "config");

    let good = write_config(dir.path(), TINY);
    let o = run(&[
        "eval",
        "--config",
        &good,
        "--out",
        &out,
        "--checkpoint",
        "/nonexistent.ckpt",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_kind(&o), "io");

    let o = run(&[
        "plot",
        "--config",
        &good,
        "--out",
        &dir.path().join("empty").display().to_string(),
    ]);
    assert_ne!(o.status.code(), Some(0));
    error_kind(&o);

    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_kind(&o), "usage");

    let o = run(&["train", "--seed", "minus-one"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for cmd in ["gen-data", "train", "sample", "eval", "sweep", "plot"] {
        assert!(text.contains(cmd), "{cmd}");
    }
}

#[test]
fn same_seed_same_bytes_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let outs: Vec<_> = ["a", "b"].iter().map(|n| dir.path().join(n)).collect();
    for o in &outs {
        let s = o.display().to_string();
        for cmd in ["train", "eval"] {
            assert!(run(&[cmd, "--config", &cfg, "--out", &s, "--seed", "9"])
                .status
                .success());
        }
    }
    for f in [
        "data/train.csv",
        "train_log.csv",
        "samples.csv",
        "summary.csv",
        "bpd.csv",
    ] {
        assert_eq!(
            fs::read(outs[0].join(f)).unwrap(),
            fs::read(outs[1].join(f)).unwrap(),
            "{f}"
        );
    }
}
