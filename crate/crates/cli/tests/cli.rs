use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn firesale(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_firesale"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn preset_text(case: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../core/configs/{case}.toml"));
    fs::read_to_string(path).unwrap()
}

/// A preset shrunk to run in well under a second.
fn tiny_config(dir: &Path, case: &str, extra: &[(&str, &str)]) -> PathBuf {
    let mut text = preset_text(case)
        .replace("train_count = 10000", "train_count = 150")
        .replace("test_count = 2000", "test_count = 50")
        .replace("epochs = 2000", "epochs = 4")
        .replace("batch_size = 256", "batch_size = 32");
    for (from, to) in extra {
        assert!(text.contains(from), "{from}");
        text = text.replace(from, to);
    }
    let path = dir.join(format!("{case}.toml"));
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_data_row_count_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = firesale(&["gen-data", "--config", "case1-linear", "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let text = fs::read_to_string(a.join("dataset.csv")).unwrap();
    assert_eq!(text.lines().count(), 12_001);
    assert_eq!(fs::read(a.join("dataset.csv")).unwrap(), fs::read(b.join("dataset.csv")).unwrap());
    assert!(a.join("dataset.meta.json").exists());
    assert!(a.join("manifest.json").exists());
}

#[test]
fn invalid_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "case1-linear", &[("liability_low = [0.6, 0.6]", "liability_low = [0.95, 0.6]")]);
    let o = firesale(&["gen-data", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("liability_low"), "{}", stderr(&o));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn train_eval_curve_flow() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "case2-cross", &[]);
    let out = dir.path().join("run");
    let o = firesale(&["gen-data", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let data = out.join("dataset.csv");
    let o = firesale(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = out.join("model_proposed.json");
    assert!(model.exists());

    let o = firesale(&["eval", "--model", s(&model), "--data", s(&data), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("regression"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report_proposed.json")).unwrap()).unwrap();
    assert_eq!(report["regression"]["result"]["estimates"].as_array().unwrap().len(), 3);
    assert_eq!(report["regression"]["true_null"]["null_values"], serde_json::json!([-0.15, -0.015, 1.0]));

    let o = firesale(&["curve", "--model", s(&model), "--data", s(&data), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let curve = fs::read_to_string(out.join("curve_proposed.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 2 * 201);
}

#[test]
fn oracle_eval_reports_zero_mse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "case1-exp", &[]);
    let out = dir.path().join("run");
    assert!(firesale(&["gen-data", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let o = firesale(&["eval", "--oracle", "--data", s(&out.join("dataset.csv")), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report_oracle.json")).unwrap()).unwrap();
    assert_eq!(report["mse_sum"].as_f64(), Some(0.0));
}

#[test]
fn hash_mismatch_exits_2_with_both_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "case1-linear", &[]);
    let out = dir.path().join("run");
    assert!(firesale(&["gen-data", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let data = out.join("dataset.csv");
    let o = firesale(&["train", "--config", s(&cfg), "--seed", "5", "--data", s(&data), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    let hashes = err.split_whitespace().filter(|w| w.len() == 64).count();
    assert_eq!(hashes, 2, "{err}");
}

#[test]
fn inclusive_without_gamma_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "case1-linear", &[]);
    let out = dir.path().join("run");
    assert!(firesale(&["gen-data", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let data = out.join("dataset.csv");
    let text = fs::read_to_string(&data).unwrap();
    // Keep s_1, s_2, ell_agg_1, p_1.
    let stripped: String = text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            format!("{},{},{},{}\n", f[0], f[1], f[4], f[5])
        })
        .collect();
    fs::write(&data, stripped).unwrap();
    let o = firesale(&["train", "--config", s(&cfg), "--variant", "inclusive", "--data", s(&data), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("gamma"), "{}", stderr(&o));
}

#[test]
fn missing_model_exits_1_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no_such_model.json");
    let o = firesale(&["eval", "--model", s(&missing), "--data", "x.csv", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no_such_model.json"), "{}", stderr(&o));
}

#[test]
fn diverging_training_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "case1-linear", &[("learning_rate = 1e-3", "learning_rate = 1e200")]);
    let out = dir.path().join("run");
    assert!(firesale(&["gen-data", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let o = firesale(&["train", "--config", s(&cfg), "--data", s(&out.join("dataset.csv")), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("learning rate"));
}

#[test]
fn repro_writes_comparison_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path(), "case1-arctan", &[]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = firesale(&["repro", "case1-arctan", "--config", s(&cfg), "--out", s(out), "--threads", "1"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let stdout = String::from_utf8_lossy(&o.stdout);
        for v in ["proposed", "linear-price", "inclusive"] {
            assert!(stdout.contains(&format!("| {v} |")), "{stdout}");
        }
    }
    assert_eq!(fs::read(a.join("repro.json")).unwrap(), fs::read(b.join("repro.json")).unwrap());
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
}

#[test]
fn unknown_case_is_a_usage_error() {
    let o = firesale(&["repro", "case9"]);
    assert!(!o.status.success());
}
