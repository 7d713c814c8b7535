use std::fs;

use firesale::config::ExperimentConfig;
use firesale::dataset::Dataset;
use firesale::net::{DualModel, Variant};
use firesale::pipeline::{self, DatasetMeta, Manifest};
use firesale::Error;

fn small(case: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(case).unwrap();
    cfg.data.train_count = 120;
    cfg.data.test_count = 40;
    cfg.train.epochs = 3;
    cfg.train.batch_size = 32;
    cfg
}

#[test]
fn gen_data_writes_rows_sidecar_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("case1-linear");
    let out = pipeline::gen_data(&cfg, dir.path()).unwrap();
    let text = fs::read_to_string(&out.dataset).unwrap();
    assert_eq!(text.lines().count(), 161);
    assert!(text.starts_with("s_1,s_2,gamma_1,gamma_2,ell_agg_1,p_1\n"));
    let meta = DatasetMeta::load(&out.dataset).unwrap();
    assert_eq!(meta.train_rows, [0, 120]);
    assert_eq!(meta.test_rows, [120, 160]);
    assert_eq!(meta.config_hash, cfg.data_hash());
    let manifest: Manifest =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert!(manifest.outputs.contains_key("dataset.csv"));
    assert!(manifest.outputs.contains_key("dataset.meta.json"));

    let again = tempfile::tempdir().unwrap();
    pipeline::gen_data(&cfg, again.path()).unwrap();
    assert_eq!(fs::read(&out.dataset).unwrap(), fs::read(again.path().join("dataset.csv")).unwrap());
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("case2-cross");
    let data = pipeline::gen_data(&cfg, dir.path()).unwrap();
    let trained = pipeline::train_variant(&cfg, Variant::Proposed, &data.dataset, dir.path()).unwrap();
    let loaded = DualModel::load(&trained.model_path).unwrap();
    assert_eq!(loaded, trained.model);
    assert!(dir.path().join("train_proposed.csv").exists());
    let report = pipeline::eval_model(&trained.model_path, &data.dataset, dir.path()).unwrap();
    assert_eq!(report.samples, 40);
    let block = report.regression.as_ref().unwrap();
    assert_eq!(block.result.estimates.len(), 3);
    for f in ["report_proposed.json", "summary_proposed.csv", "curve_proposed.csv", "regression_proposed.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn mismatched_config_is_refused_with_both_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("case1-linear");
    let data = pipeline::gen_data(&cfg, dir.path()).unwrap();
    let other = cfg.clone().with_seed(7);
    match pipeline::train_variant(&other, Variant::Proposed, &data.dataset, dir.path()) {
        Err(Error::Contract(msg)) => {
            assert!(msg.contains(&cfg.data_hash()) && msg.contains(&other.data_hash()), "{msg}");
        }
        other => panic!("{:?}", other.err()),
    }
}

#[test]
fn inclusive_needs_gamma_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("case1-linear");
    let data = pipeline::gen_data(&cfg, dir.path()).unwrap();
    let observed = Dataset::read_csv(&data.dataset).unwrap().observed_only();
    observed.write_csv(&data.dataset).unwrap();
    let err = pipeline::train_variant(&cfg, Variant::Inclusive, &data.dataset, dir.path()).err().unwrap();
    assert!(matches!(err, Error::Contract(_)), "{err}");
}

#[test]
fn oracle_report_has_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("case1-arctan");
    let data = pipeline::gen_data(&cfg, dir.path()).unwrap();
    let report = pipeline::eval_oracle(&data.dataset, dir.path()).unwrap();
    assert_eq!(report.mse_sum, 0.0);
    assert!((report.correlation.unwrap()[0] - 1.0).abs() < 1e-12);
}

#[test]
fn repro_is_deterministic_and_complete() {
    let cfg = small("case1-exp");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = pipeline::repro(&cfg, a.path()).unwrap();
    let rb = pipeline::repro(&cfg, b.path()).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(ra.rows.len(), 3);
    assert_eq!(
        fs::read(a.path().join("repro.json")).unwrap(),
        fs::read(b.path().join("repro.json")).unwrap()
    );
    let table = fs::read_to_string(a.path().join("comparison.md")).unwrap();
    for v in ["proposed", "linear-price", "inclusive"] {
        assert!(table.contains(&format!("| {v} |")), "{table}");
    }
    let manifest: Manifest =
        serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    let mb: Manifest = serde_json::from_str(&fs::read_to_string(b.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest, mb);
    assert!(manifest.outputs.len() >= 12);
}

#[test]
fn missing_model_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = pipeline::eval_model(&dir.path().join("nope.json"), &dir.path().join("d.csv"), dir.path()).unwrap_err();
    assert!(err.is_io());
    assert!(err.to_string().contains("nope.json"));
}
