use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use compcov::io::{estimate_file, matrix_market, sketch_file};
use compcov_core::{estimate, EstimateKind, SymMatrix};

fn compcov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compcov"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, p: usize, n: usize) -> PathBuf {
    let out = dir.join("d.mtx");
    let o = compcov(&[
        "synth",
        "--model",
        "spiked",
        "--spikes",
        "10,5",
        "--sigma",
        "0.3",
        "--p",
        &p.to_string(),
        "--n",
        &n.to_string(),
        "--out",
        arg(&out),
        "--seed",
        "3",
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn sketch_header_takes_p_from_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 784, 3);
    let out = dir.path().join("s.bin");
    let o = compcov(&[
        "sketch",
        "--input",
        arg(&data),
        "--m",
        "314",
        "--s",
        "100",
        "--seed",
        "7",
        "--out",
        arg(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("p = 784, n = 3"));
    let set = sketch_file::load(&out).unwrap();
    assert_eq!(set.spec().p(), 784);
    assert_eq!(set.spec().m(), 314);
    assert_eq!(set.spec().dist().sparsity(), Some(100.0));
    assert_eq!(set.spec().master_seed(), 7);
    assert_eq!(set.n(), 3);
}

#[test]
fn missing_input_names_path() {
    let o = compcov(&[
        "sketch",
        "--input",
        "/no/such/dir/data.mtx",
        "--m",
        "2",
        "--s",
        "2",
        "--out",
        "x.bin",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("/no/such/dir/data.mtx"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn m_at_least_p_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 8, 4);
    let out = dir.path().join("s.bin");
    let o = compcov(&[
        "sketch",
        "--input",
        arg(&data),
        "--m",
        "8",
        "--s",
        "2",
        "--out",
        arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("m < p"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn estimate_matches_in_process_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 12, 30);
    let sketch = dir.path().join("s.bin");
    let o = compcov(&[
        "sketch",
        "--input",
        arg(&data),
        "--m",
        "4",
        "--s",
        "3",
        "--out",
        arg(&sketch),
        "-q",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let set = sketch_file::load(&sketch).unwrap();

    for (flag, kind) in [
        ("--biased", EstimateKind::Biased),
        ("--unbiased", EstimateKind::Unbiased),
    ] {
        let out = dir.path().join(format!("c{flag}.mtx"));
        let o = compcov(&[
            "estimate",
            "--sketch",
            arg(&sketch),
            "--out",
            arg(&out),
            flag,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let written: SymMatrix = matrix_market::load_symmetric(&out).unwrap();
        let want = estimate(&set, kind).unwrap();
        assert_eq!(written, want.matrix);

        let side = estimate_file::load_sidecar(&out).unwrap();
        assert_eq!(side.kind, kind);
        assert_eq!(side.kappa, 0.0);
        assert_eq!(side.gamma, Some(4.0 / 3.0));
        let raw: serde_json::Value =
            serde_json::from_slice(&std::fs::read(estimate_file::sidecar_path(&out)).unwrap())
                .unwrap();
        assert_eq!(raw["version"], 1);
        assert_eq!(raw["kind"], format!("{kind:?}"));
        assert!(raw["wall_time_seconds"].as_f64().unwrap() >= 0.0);
        if kind == EstimateKind::Unbiased {
            assert_eq!(side.alpha1, Some(0.0));
            assert!((side.alpha2.unwrap() - 1.0 / 17.0).abs() < 1e-15);
        }
    }
}

#[test]
fn corrupt_sketch_exits_3_with_offset() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 10, 5);
    let sketch = dir.path().join("s.bin");
    let o = compcov(&[
        "sketch",
        "--input",
        arg(&data),
        "--m",
        "3",
        "--gaussian",
        "--out",
        arg(&sketch),
        "-q",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = std::fs::read(&sketch).unwrap();
    std::fs::write(&sketch, &bytes[..bytes.len() - 20]).unwrap();
    let out = dir.path().join("c.mtx");
    let o = compcov(&["estimate", "--sketch", arg(&sketch), "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("byte offset"), "{}", stderr(&o));
}

#[test]
fn eigvec_exports() {
    let dir = tempfile::tempdir().unwrap();
    let diag = SymMatrix::from_diagonal(&[3.0, 1.0, 2.0, 0.5]);
    let c = dir.path().join("c.mtx");
    matrix_market::save_symmetric(&c, &diag, "").unwrap();
    let csv = dir.path().join("v.csv");
    let summary = dir.path().join("summary.json");
    let o = compcov(&[
        "eigvec",
        "--input",
        arg(&c),
        "--k",
        "1",
        "--out",
        arg(&csv),
        "--summary",
        arg(&summary),
        "-q",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text, "index,v1\n0,1e0\n1,0e0\n2,0e0\n3,0e0\n");
    let s: serde_json::Value = serde_json::from_slice(&std::fs::read(&summary).unwrap()).unwrap();
    assert_eq!(s["version"], 1);
    assert_eq!(s["eigenvalues"][0], 3.0);

    let pgm = dir.path().join("v.pgm");
    let o = compcov(&[
        "eigvec",
        "--input",
        arg(&c),
        "--out",
        arg(&csv),
        "--pgm",
        arg(&pgm),
        "--dims",
        "3x2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!pgm.exists());
    let o = compcov(&[
        "eigvec",
        "--input",
        arg(&c),
        "--out",
        arg(&csv),
        "--pgm",
        arg(&pgm),
        "--dims",
        "2x2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(&std::fs::read(&pgm).unwrap()[..11], b"P5\n2 2\n255\n");
}

#[test]
fn eigvec_accepts_28_by_28_for_p_784() {
    let dir = tempfile::tempdir().unwrap();
    let diag: Vec<f64> = (0..784).map(|i| 1.0 + (i % 7) as f64).collect();
    let c = dir.path().join("c.mtx");
    matrix_market::save_symmetric(&c, &SymMatrix::from_diagonal(&diag), "").unwrap();
    let pgm = dir.path().join("v.pgm");
    let o = compcov(&[
        "eigvec",
        "--input",
        arg(&c),
        "--out",
        arg(&dir.path().join("v.csv")),
        "--pgm",
        arg(&pgm),
        "--dims",
        "28x28",
        "-q",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&pgm).unwrap().len(), 13 + 784);
}

#[test]
fn verify_rejects_low_trials_and_reports_seeds() {
    let o = compcov(&["verify", "--trials", "100"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("minimum"));

    let o = compcov(&["verify", "--trials", "10000", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["version"], 1);
    assert_eq!(report["seed"], 1);
    assert_eq!(report["passed"], true);
    for check in report["checks"].as_array().unwrap() {
        assert!(check["seed"].is_u64());
        assert_eq!(check["trials"], 10000);
    }
}

fn strip_timing(v: &mut serde_json::Value) {
    v["timing"] = serde_json::Value::Null;
    for cell in v["cells"].as_array_mut().unwrap() {
        cell["timing"] = serde_json::Value::Null;
    }
}

#[test]
fn sweep_is_deterministic_apart_from_timings() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 20, 40);
    let mut reports = Vec::new();
    for (i, jobs) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("r{i}.json"));
        let o = compcov(&[
            "sweep",
            "--input",
            arg(&data),
            "--gammas",
            "0.2,0.5",
            "--trials",
            "6",
            "--seed",
            "9",
            "--jobs",
            jobs,
            "--out",
            arg(&out),
            "-q",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(out.with_extension("csv").exists());
        let mut v: serde_json::Value =
            serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["cells"].as_array().unwrap().len(), 4);
        assert_eq!(v["cells"][0]["seeds"].as_array().unwrap().len(), 6);
        strip_timing(&mut v);
        reports.push(v);
    }
    assert_eq!(reports[0], reports[1]);
    // the reference cache lands next to the dataset
    let cached = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .contains(".cn-")
        })
        .count();
    assert_eq!(cached, 1);
}

#[test]
fn synth_from_spec_file_and_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"model":{"type":"stable_rank","beta":2.0},"p":8,"n":5,"seed":4}"#,
    )
    .unwrap();
    let out = dir.path().join("d.csv");
    let o = compcov(&["synth", "--spec", arg(&spec), "--out", arg(&out), "-q"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 8);

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"model":{"type":"stable_rank","beta":20.0},"p":8,"n":5,"seed":4}"#,
    )
    .unwrap();
    let o = compcov(&["synth", "--spec", arg(&bad), "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(compcov(&["frobnicate"]).status.code(), Some(2));
}
