use std::path::Path;
use std::process::{Command, Output};

use volgraph_core::synth::SynthConfig;

fn volgraph(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_volgraph"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn volgraph")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn small_dataset(dir: &Path, domains: &str) {
    let synth = SynthConfig::default().with_dims([14, 16, 12]);
    std::fs::write(
        dir.join("synth.json"),
        serde_json::to_string(&synth).unwrap(),
    )
    .unwrap();
    let out = volgraph(
        &[
            "generate",
            "--config",
            "synth.json",
            "--seed",
            "3",
            "--out",
            "data",
            "--per-class",
            "3",
            "--domains",
            domains,
        ],
        dir,
    );
    ok(&out);
}

fn first_grid(dir: &Path) -> std::path::PathBuf {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "vgr"))
        .collect();
    paths.sort();
    paths.remove(0)
}

const QUICK: &str = r#"{"train": {"epochs": 3, "batch_size": 4}, "seeds": [0, 1, 2]}"#;

#[test]
fn graph_pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_dataset(dir, "healthy");
    std::fs::write(dir.join("run.json"), QUICK).unwrap();

    ok(&volgraph(
        &[
            "encode",
            "--manifest",
            "data/manifest.jsonl",
            "--out",
            "g.vgp",
        ],
        dir,
    ));
    let prov: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("g.vgp.provenance.json")).unwrap())
            .unwrap();
    assert_eq!(prov["sample_seeds"].as_array().unwrap().len(), 21);

    let stdout = ok(&volgraph(
        &[
            "train", "--config", "run.json", "--seed", "1", "--data", "g.vgp", "--out", "m.vgnn",
        ],
        dir,
    ));
    let lines: Vec<serde_json::Value> = stdout
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!lines.is_empty() && lines.len() <= 3);
    for (i, l) in lines.iter().enumerate() {
        assert_eq!(l["epoch"], i);
        for key in ["lr", "train_loss", "val_acc"] {
            assert!(l[key].is_number(), "{l}");
        }
    }

    let eval = ok(&volgraph(
        &[
            "eval", "--model", "m.vgnn", "--data", "g.vgp", "--all", "--seed", "1",
        ],
        dir,
    ));
    let v: serde_json::Value = serde_json::from_str(eval.trim()).unwrap();
    assert_eq!(v["total"], 21);

    ok(&volgraph(
        &[
            "train", "--config", "run.json", "--data", "g.vgp", "--record", "rec.json",
        ],
        dir,
    ));
    let table = ok(&volgraph(
        &["report", "--records", "rec.json", "--out-dir", "out"],
        dir,
    ));
    assert!(table.contains("graph 3D"), "{table}");
    assert!(dir.join("out/report.csv").exists());
    assert!(dir.join("out/report.txt").exists());
}

#[test]
fn reduce_and_segment_write_containers() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_dataset(dir, "healthy");
    ok(&volgraph(
        &[
            "reduce",
            "--manifest",
            "data/manifest.jsonl",
            "--variant",
            "sca_stack",
            "--out",
            "sca",
        ],
        dir,
    ));
    let first = volgraph_core::container::Grid::read(first_grid(&dir.join("sca"))).unwrap();
    assert!(first.stack);
    assert_eq!(first.dims.len(), 3);
    assert_eq!(first.dims[2], 3);

    let vol = first_grid(&dir.join("data"));
    ok(&volgraph(
        &[
            "segment",
            "--input",
            vol.to_str().unwrap(),
            "--out",
            "labels.vgr",
            "--smoothed",
            "smooth.vgr",
        ],
        dir,
    ));
    let labels: volgraph_core::LabelMap =
        volgraph_core::container::Grid::read(dir.join("labels.vgr"))
            .unwrap()
            .try_into()
            .unwrap();
    assert!(labels.segment_count() > 1);
    assert!(dir.join("smooth.vgr").exists());
}

#[test]
fn transfer_writes_both_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_dataset(dir, "healthy,unhealthy");
    std::fs::write(dir.join("run.json"), QUICK).unwrap();
    ok(&volgraph(
        &[
            "transfer",
            "--config",
            "run.json",
            "--data",
            "data/manifest.jsonl",
            "--variant",
            "gray2d",
            "--out",
            "t.json",
        ],
        dir,
    ));
    let recs: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("t.json")).unwrap()).unwrap();
    let recs = recs.as_array().unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0]["train_test"], "healthy-unhealthy");
    assert_eq!(recs[1]["train_test"], "healthy+unhealthy-unhealthy");
}

#[test]
fn parameter_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("bad.json"), r#"{"dims": "oops"}"#).unwrap();
    let out = volgraph(&["generate", "--config", "bad.json", "--out", "x"], dir);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(dir.join("zero.json"), r#"{"train": {"batch_size": 0}}"#).unwrap();
    small_dataset(dir, "healthy");
    let out = volgraph(
        &[
            "train",
            "--config",
            "zero.json",
            "--data",
            "data/manifest.jsonl",
            "--variant",
            "gray2d",
            "--out",
            "m",
        ],
        dir,
    );
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = volgraph(
        &["report", "--records", "missing.json", "--out-dir", "o"],
        dir,
    );
    assert_eq!(out.status.code(), Some(1));
    let out = volgraph(&["frobnicate"], dir);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn diverging_training_exits_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    small_dataset(dir, "healthy");
    std::fs::write(
        dir.join("hot.json"),
        r#"{"train": {"epochs": 5, "lr_phase1": 1e30, "optimizer": {"type": "sgd", "momentum": 0.0}}}"#,
    )
    .unwrap();
    let out = volgraph(
        &[
            "train",
            "--config",
            "hot.json",
            "--data",
            "data/manifest.jsonl",
            "--variant",
            "gray2d",
            "--out",
            "m",
        ],
        dir,
    );
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
