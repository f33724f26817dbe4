use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use m3s_core::model::{load_checkpoint, WeightMatrix};
use m3s_core::spectra::{load_dataset, load_dataset_with_len, DataFormat, SynthConfig};

fn m3s(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_m3s"))
        .args(args)
        .env("M3S_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a small, fast generator config: 128-point spectra.
fn small_config(dir: &Path, per_class: usize) -> PathBuf {
    let mut cfg = SynthConfig {
        length: 128,
        ..SynthConfig::default()
    };
    for (i, c) in cfg.classes.iter_mut().enumerate() {
        c.count = per_class;
        for (k, p) in c.peaks.iter_mut().enumerate() {
            p.center = 10.0 + 25.0 * k as f64 + 6.0 * i as f64;
            p.width = 4.0;
        }
    }
    let path = dir.join("synth.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    path
}

fn small_data(dir: &Path, per_class: usize) -> PathBuf {
    let cfg = small_config(dir, per_class);
    let data = dir.join("data.csv");
    ok(&m3s(&[
        "synth",
        "--config",
        s(&cfg),
        "--seed",
        "3",
        "--out",
        s(&data),
    ]));
    data
}

#[test]
fn synth_default_is_reproducible_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&m3s(&["synth", "--seed", "1", "--out", s(&a)]));
    ok(&m3s(&["synth", "--seed", "1", "--out", s(&b)]));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let d = load_dataset(&a, DataFormat::Csv).unwrap();
    assert_eq!(d.len(), 400);
    assert!(dir.path().join("a.csv.manifest.json").exists());

    let json = dir.path().join("a.json");
    ok(&m3s(&["synth", "--seed", "1", "--out", s(&json)]));
    assert_eq!(
        load_dataset(&json, DataFormat::Json).unwrap().samples(),
        d.samples()
    );
}

#[test]
fn synth_rejects_negative_noise() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = serde_json::to_value(SynthConfig::default()).unwrap();
    cfg["noise_sigma"] = serde_json::json!(-0.1);
    let path = dir.path().join("bad.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = m3s(&[
        "synth",
        "--config",
        s(&path),
        "--out",
        s(&dir.path().join("x.csv")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("InvalidConfig") && err.contains("noise_sigma"),
        "{err}"
    );
}

#[test]
fn train_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), 6);
    let run = dir.path().join("run");
    ok(&m3s(&[
        "train",
        "--data",
        s(&data),
        "--length",
        "128",
        "--scales",
        "16,32",
        "--epochs",
        "40",
        "--lr",
        "0.02",
        "--seed",
        "2",
        "--out",
        s(&run),
    ]));
    for f in ["checkpoint.json", "loss.csv", "manifest.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let log = std::fs::read_to_string(run.join("loss.csv")).unwrap();
    assert_eq!(log.lines().count(), 41);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 2);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);

    let eval = dir.path().join("eval");
    let ckpt = run.join("checkpoint.json");
    ok(&m3s(&[
        "evaluate",
        "--checkpoint",
        s(&ckpt),
        "--data",
        s(&data),
        "--subset",
        "train",
        "--out",
        s(&eval),
    ]));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(report["accuracy"], 1.0, "{report}");
    let confusion = std::fs::read_to_string(eval.join("confusion.csv")).unwrap();
    assert_eq!(confusion.lines().count(), 5);

    // a different sequence length is a schema problem, not a crash
    let other = dir.path().join("other.csv");
    ok(&m3s(&["synth", "--seed", "1", "--out", s(&other)]));
    let out = m3s(&[
        "evaluate",
        "--checkpoint",
        s(&ckpt),
        "--data",
        s(&other),
        "--out",
        s(&eval),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("SchemaError"));
}

#[test]
fn fixed_weights_stay_frozen() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), 4);
    let run = dir.path().join("run");
    ok(&m3s(&[
        "train",
        "--data",
        s(&data),
        "--length",
        "128",
        "--scales",
        "16",
        "--epochs",
        "3",
        "--lr",
        "0.01",
        "--weights",
        "fixed",
        "--ratio",
        "0.9",
        "--out",
        s(&run),
    ]));
    let model = load_checkpoint(&run.join("checkpoint.json")).unwrap();
    assert_eq!(model.weight_matrix, WeightMatrix::fixed(0.9));
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), 4);
    let out = m3s(&[
        "train",
        "--data",
        s(&data),
        "--length",
        "128",
        "--scales",
        "16",
        "--epochs",
        "5",
        "--lr",
        "1e308",
        "--out",
        s(&dir.path().join("run")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("DivergedLoss"));
}

#[test]
fn bad_training_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), 4);
    let out = m3s(&[
        "train",
        "--data",
        s(&data),
        "--length",
        "128",
        "--scales",
        "16",
        "--lr",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lr"));
}

#[test]
fn ablation_grid_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), 4);
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        ok(&m3s(&[
            "ablate",
            "--data",
            s(&data),
            "--length",
            "128",
            "--scale-sets",
            "16;16,32",
            "--weight-modes",
            "fixed,adaptive",
            "--seeds",
            "1,2",
            "--epochs",
            "2",
            "--lr",
            "0.01",
            "--out",
            s(&out_dir),
        ]));
        (
            std::fs::read_to_string(out_dir.join("ablation.csv")).unwrap(),
            std::fs::read_to_string(out_dir.join("ablation_runs.csv")).unwrap(),
        )
    };
    let (summary, runs) = run("a");
    assert_eq!(summary.lines().count(), 1 + 2 * 2);
    assert_eq!(runs.lines().count(), 1 + 2 * 2 * 2);
    assert_eq!(run("b"), (summary, runs));

    let single = dir.path().join("single");
    ok(&m3s(&[
        "ablate",
        "--data",
        s(&data),
        "--length",
        "128",
        "--scale-sets",
        "16",
        "--weight-modes",
        "adaptive",
        "--seeds",
        "1",
        "--epochs",
        "1",
        "--lr",
        "0.01",
        "--out",
        s(&single),
    ]));
    assert_eq!(
        std::fs::read_to_string(single.join("ablation.csv"))
            .unwrap()
            .lines()
            .count(),
        2
    );
}

#[test]
fn report_aggregates_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), 4);
    let mut reports = Vec::new();
    for seed in ["1", "2"] {
        let run = dir.path().join(format!("run{seed}"));
        let eval = dir.path().join(format!("eval{seed}"));
        ok(&m3s(&[
            "train",
            "--data",
            s(&data),
            "--length",
            "128",
            "--scales",
            "16",
            "--epochs",
            "2",
            "--lr",
            "0.01",
            "--seed",
            seed,
            "--out",
            s(&run),
        ]));
        ok(&m3s(&[
            "evaluate",
            "--checkpoint",
            s(&run.join("checkpoint.json")),
            "--data",
            s(&data),
            "--out",
            s(&eval),
        ]));
        reports.push(eval.join("metrics.json"));
    }
    let table = dir.path().join("table.csv");
    let out = m3s(&["report", s(&reports[0]), s(&reports[1]), "--out", s(&table)]);
    ok(&out);
    let csv = std::fs::read_to_string(&table).unwrap();
    assert!(csv.starts_with("metric,mean,std,n\nACC,"));
    assert_eq!(csv.lines().count(), 10);
}

#[test]
fn encode_writes_csv_and_png() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_data(dir.path(), 2);
    let csv_dir = dir.path().join("csv");
    ok(&m3s(&[
        "encode",
        "--data",
        s(&data),
        "--length",
        "128",
        "--scales",
        "16",
        "--out",
        s(&csv_dir),
    ]));
    let text = std::fs::read_to_string(csv_dir.join("gaf_16.csv")).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 1 + 256);

    let png_dir = dir.path().join("png");
    ok(&m3s(&[
        "encode",
        "--data",
        s(&data),
        "--length",
        "128",
        "--scales",
        "16,32",
        "--png",
        "--limit",
        "1",
        "--out",
        s(&png_dir),
    ]));
    let pngs = std::fs::read_dir(&png_dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "png")
        })
        .count();
    assert_eq!(pngs, 2);
    let d = load_dataset_with_len(&data, DataFormat::Csv, 128).unwrap();
    assert_eq!(d.len(), 8);
}
