//! File-level commands: dataset generation, training, evaluation, curve
//! export and full case reproduction. Every command writes only inside its
//! output directory and records what it wrote in `manifest.json` there.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::contagion::{generate_dataset, BankingSystem};
use crate::dataset::{fmt17, Dataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport, Oracle, Predictor};
use crate::idf::IdfSpec;
use crate::net::{DualModel, Variant};
use crate::training::{train, TrainReport};

pub const TOOL_VERSION: &str = concat!("firesale ", env!("CARGO_PKG_VERSION"));

pub const DATASET_FILE: &str = "dataset.csv";
pub const DATASET_META_FILE: &str = "dataset.meta.json";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Sidecar describing how a dataset was generated and how it is split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub tool_version: String,
    pub config_name: String,
    pub config_hash: String,
    pub seed: u64,
    pub rows: usize,
    /// Half-open row ranges.
    pub train_rows: [usize; 2],
    pub test_rows: [usize; 2],
    pub system: BankingSystem,
    pub idf: IdfSpec,
}

impl DatasetMeta {
    pub fn sidecar_path(dataset: &Path) -> PathBuf {
        let name = dataset.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned());
        dataset.with_file_name(format!("{name}.meta.json"))
    }

    pub fn load(dataset: &Path) -> Result<Self> {
        let path = Self::sidecar_path(dataset);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_name: String,
    pub config_hash: String,
    pub seed: u64,
    /// File name → SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Adds `files` to the manifest in `out`, replacing it when it describes a
/// different configuration.
fn record_outputs(out: &Path, name: &str, hash: &str, seed: u64, files: &[PathBuf]) -> Result<()> {
    let path = out.join(MANIFEST_FILE);
    let mut manifest = fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str::<Manifest>(&t).ok())
        .filter(|m| m.config_hash == hash && m.seed == seed && m.tool_version == TOOL_VERSION)
        .unwrap_or_else(|| Manifest {
            tool_version: TOOL_VERSION.into(),
            config_name: name.into(),
            config_hash: hash.into(),
            seed,
            outputs: BTreeMap::new(),
        });
    for f in files {
        let key = f.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        manifest.outputs.insert(key, sha256_file(f)?);
    }
    write_json(&path, &manifest)
}

pub struct GenOutput {
    pub dataset: PathBuf,
    pub meta: DatasetMeta,
}

/// Simulates `train_count + test_count` equilibria; the first rows are the
/// training split.
pub fn gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<GenOutput> {
    let (sys, spec) = cfg.build()?;
    ensure_dir(out)?;
    let rows = cfg.data.train_count + cfg.data.test_count;
    let records = generate_dataset(&sys, &spec, rows, cfg.data.seed)?;
    let data = Dataset::from_records(&records)?;
    let dataset = out.join(DATASET_FILE);
    data.write_csv(&dataset)?;
    let meta = DatasetMeta {
        tool_version: TOOL_VERSION.into(),
        config_name: cfg.name.clone(),
        config_hash: cfg.data_hash(),
        seed: cfg.data.seed,
        rows,
        train_rows: [0, cfg.data.train_count],
        test_rows: [cfg.data.train_count, rows],
        system: sys,
        idf: spec,
    };
    let meta_path = DatasetMeta::sidecar_path(&dataset);
    write_json(&meta_path, &meta)?;
    record_outputs(out, &cfg.name, &meta.config_hash, cfg.data.seed, &[dataset.clone(), meta_path])?;
    Ok(GenOutput { dataset, meta })
}

fn load_split(dataset: &Path, meta: &DatasetMeta, rows: [usize; 2]) -> Result<Dataset> {
    let data = Dataset::read_csv(dataset)?;
    if data.len() != meta.rows || rows[0] > rows[1] || rows[1] > data.len() {
        return Err(Error::format(
            dataset,
            format!("has {} rows, metadata expects {}", data.len(), meta.rows),
        ));
    }
    Ok(data.slice(rows[0]..rows[1]))
}

pub fn model_file(variant: Variant) -> String {
    format!("model_{variant}.json")
}

pub struct TrainOutput {
    pub model_path: PathBuf,
    pub model: DualModel,
    pub report: TrainReport,
}

/// Trains `variant` on the training split of `dataset`, which must have been
/// generated from the same data-defining configuration.
pub fn train_variant(cfg: &ExperimentConfig, variant: Variant, dataset: &Path, out: &Path) -> Result<TrainOutput> {
    let meta = DatasetMeta::load(dataset)?;
    let hash = cfg.data_hash();
    if meta.config_hash != hash {
        return Err(Error::Contract(format!(
            "dataset was generated from config hash {} but the current config hashes to {hash}",
            meta.config_hash
        )));
    }
    let data = load_split(dataset, &meta, meta.train_rows)?;
    let mut model = DualModel::new(variant, meta.system.holdings(), &cfg.architecture, cfg.train.seed)?;
    model.set_fingerprint(hash.clone());
    let report = train(&mut model, &data, &cfg.train)?;
    ensure_dir(out)?;
    let model_path = out.join(model_file(variant));
    model.save(&model_path)?;
    let csv = out.join(format!("train_{variant}.csv"));
    report.write_csv(&csv)?;
    record_outputs(out, &cfg.name, &hash, cfg.data.seed, &[model_path.clone(), csv])?;
    Ok(TrainOutput {
        model_path,
        model,
        report,
    })
}

fn check_compatible(model: &DualModel, meta: &DatasetMeta) -> Result<()> {
    if model.banks() != meta.system.banks() || model.assets() != meta.system.assets() {
        return Err(Error::Contract(format!(
            "model expects {} banks and {} assets, dataset has {} and {}",
            model.banks(),
            model.assets(),
            meta.system.banks(),
            meta.system.assets()
        )));
    }
    if model.holdings() != meta.system.holdings() {
        return Err(Error::Contract("model and dataset use different holdings".into()));
    }
    if !model.fingerprint().is_empty() && model.fingerprint() != meta.config_hash {
        return Err(Error::Contract(format!(
            "model was trained on data with config hash {} but the dataset has {}",
            model.fingerprint(),
            meta.config_hash
        )));
    }
    Ok(())
}

fn write_report(report: &EvalReport, out: &Path, meta: &DatasetMeta) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let tag = &report.model;
    let json = out.join(format!("report_{tag}.json"));
    report.write_json(&json)?;
    let summary = out.join(format!("summary_{tag}.csv"));
    report.write_summary_csv(&summary)?;
    let curve = out.join(format!("curve_{tag}.csv"));
    report.write_curve_csv(&curve)?;
    let mut files = vec![json, summary, curve];
    if report.regression.is_some() {
        let reg = out.join(format!("regression_{tag}.csv"));
        report.write_regression_csv(&reg)?;
        files.push(reg);
    }
    record_outputs(out, &meta.config_name, &meta.config_hash, meta.seed, &files)?;
    Ok(files)
}

fn evaluate_on_test(predictor: &dyn Predictor, dataset: &Path, meta: &DatasetMeta, out: &Path) -> Result<EvalReport> {
    let test = load_split(dataset, meta, meta.test_rows)?;
    let report = evaluate(predictor, &test, &meta.idf)?;
    write_report(&report, out, meta)?;
    Ok(report)
}

/// Evaluates a saved model on the held-out split of `dataset`.
pub fn eval_model(model_path: &Path, dataset: &Path, out: &Path) -> Result<EvalReport> {
    let model = DualModel::load(model_path)?;
    let meta = DatasetMeta::load(dataset)?;
    check_compatible(&model, &meta)?;
    evaluate_on_test(&model, dataset, &meta, out)
}

/// Evaluates the ground truth itself; a reference point for the reports.
pub fn eval_oracle(dataset: &Path, out: &Path) -> Result<EvalReport> {
    let meta = DatasetMeta::load(dataset)?;
    let oracle = Oracle { spec: &meta.idf };
    evaluate_on_test(&oracle, dataset, &meta, out)
}

/// Writes only the reconstructed inverse demand curve.
pub fn curve(model_path: &Path, dataset: &Path, out: &Path) -> Result<PathBuf> {
    let model = DualModel::load(model_path)?;
    let meta = DatasetMeta::load(dataset)?;
    check_compatible(&model, &meta)?;
    let test = load_split(dataset, &meta, meta.test_rows)?;
    let report = evaluate(&model, &test, &meta.idf)?;
    ensure_dir(out)?;
    let path = out.join(format!("curve_{}.csv", model.variant()));
    report.write_curve_csv(&path)?;
    record_outputs(out, &meta.config_name, &meta.config_hash, meta.seed, std::slice::from_ref(&path))?;
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub stopped_early: bool,
    pub parameters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproRow {
    pub variant: Variant,
    pub train: TrainSummary,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproSummary {
    pub case: String,
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<ReproRow>,
}

impl ReproSummary {
    pub fn row(&self, variant: Variant) -> Option<&ReproRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// Markdown tables: one row per model, then the regression block when
    /// present.
    pub fn comparison_table(&self) -> String {
        let m = self.rows.first().map_or(0, |r| r.report.mse_per_asset.len());
        let mut s = String::new();
        let _ = writeln!(s, "## {}\n", self.case);
        let mut header = String::from("| model | parameters | MSE (sum)");
        for j in 1..=m {
            let _ = write!(header, " | MSE asset {j}");
        }
        for j in 1..=m {
            let _ = write!(header, " | corr asset {j}");
        }
        for j in 1..=m {
            let _ = write!(header, " | scaled MAE asset {j}");
        }
        header.push_str(" | curve max error |");
        let cols = 3 + 3 * m + 1;
        let _ = writeln!(s, "{header}\n|{}", "---|".repeat(cols));
        let opt = |v: &Option<Vec<f64>>, j: usize, prec: usize| {
            v.as_ref().map_or("n/a".to_string(), |v| format!("{:.*}", prec, v[j]))
        };
        for row in &self.rows {
            let r = &row.report;
            let _ = write!(s, "| {} | {} | {:.3e}", row.variant, row.train.parameters, r.mse_sum);
            for v in &r.mse_per_asset {
                let _ = write!(s, " | {v:.3e}");
            }
            for j in 0..m {
                let _ = write!(s, " | {}", opt(&r.correlation, j, 4));
            }
            for j in 0..m {
                let _ = write!(s, " | {}", opt(&r.scaled_mae, j, 4));
            }
            let _ = writeln!(s, " | {:.4} |", r.curve_max_error);
        }
        for row in &self.rows {
            let Some(block) = &row.report.regression else {
                continue;
            };
            let reg = &block.result;
            let _ = writeln!(
                s,
                "\nRegression of predicted price 1 on scaled liquidations ({}, dof {}):\n",
                row.variant, reg.dof
            );
            let _ = writeln!(
                s,
                "| variable | estimate | std. error | true null | t | p | zero null t | p |\n|---|---|---|---|---|---|---|---|"
            );
            for k in 0..reg.estimates.len() {
                let _ = writeln!(
                    s,
                    "| {} | {:.4} | {:.4} | {} | {:.3} | {:.3} | {:.3} | {:.3e} |",
                    reg.names[k],
                    reg.estimates[k],
                    reg.standard_errors[k],
                    block.true_null.null_values[k],
                    block.true_null.t_values[k],
                    block.true_null.p_values[k],
                    block.zero_null.t_values[k],
                    block.zero_null.p_values[k],
                );
            }
        }
        s
    }

    pub fn comparison_csv(&self) -> String {
        let mut s = String::from("model,parameters,asset,mse,correlation,scaled_mae,curve_max_error\n");
        for row in &self.rows {
            let r = &row.report;
            for j in 0..r.mse_per_asset.len() {
                let opt = |v: &Option<Vec<f64>>| v.as_ref().map_or(String::new(), |v| fmt17(v[j]));
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    row.variant,
                    row.train.parameters,
                    j + 1,
                    fmt17(r.mse_per_asset[j]),
                    opt(&r.correlation),
                    opt(&r.scaled_mae),
                    fmt17(r.curve_max_error)
                );
            }
        }
        s
    }
}

/// Generates the dataset, trains every configured variant and evaluates each
/// on the held-out split.
pub fn repro(cfg: &ExperimentConfig, out: &Path) -> Result<ReproSummary> {
    let generated = gen_data(cfg, out)?;
    let mut rows = Vec::new();
    for &variant in &cfg.model.variants {
        let trained = train_variant(cfg, variant, &generated.dataset, out)?;
        let report = evaluate_on_test(&trained.model, &generated.dataset, &generated.meta, out)?;
        rows.push(ReproRow {
            variant,
            train: TrainSummary {
                epochs_run: trained.report.history.len(),
                best_epoch: trained.report.best_epoch,
                best_val_mse: trained.report.best_val_mse,
                stopped_early: trained.report.stopped_early,
                parameters: trained.model.param_count(),
            },
            report,
        });
    }
    let summary = ReproSummary {
        case: cfg.name.clone(),
        config_hash: cfg.data_hash(),
        seed: cfg.data.seed,
        rows,
    };
    let json = out.join("repro.json");
    write_json(&json, &summary)?;
    let md = out.join("comparison.md");
    fs::write(&md, summary.comparison_table()).map_err(|e| Error::io(&md, e))?;
    let csv = out.join("comparison.csv");
    fs::write(&csv, summary.comparison_csv()).map_err(|e| Error::io(&csv, e))?;
    let config = out.join("config.toml");
    fs::write(&config, cfg.to_toml()?).map_err(|e| Error::io(&config, e))?;
    record_outputs(out, &cfg.name, &summary.config_hash, cfg.data.seed, &[json, md, csv, config])?;
    Ok(summary)
}
