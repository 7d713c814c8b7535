//! Experiment configuration (TOML) and the shipped case-study presets.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contagion::BankingSystem;
use crate::error::{Error, Result};
use crate::idf::{IdfKind, IdfSpec};
use crate::net::{Architecture, Variant};
use crate::training::TrainConfig;

pub const CASES: [(&str, &str); 5] = [
    ("case1-linear", include_str!("../configs/case1-linear.toml")),
    ("case1-exp", include_str!("../configs/case1-exp.toml")),
    ("case1-arctan", include_str!("../configs/case1-arctan.toml")),
    ("case2-nocross", include_str!("../configs/case2-nocross.toml")),
    ("case2-cross", include_str!("../configs/case2-cross.toml")),
];

pub fn case_names() -> Vec<&'static str> {
    CASES.iter().map(|(n, _)| *n).collect()
}

/// `κ` either given directly or derived from the balance sheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sensitivity {
    Value(f64),
    /// `"full-liquidation"`: the most exposed bank sells everything exactly
    /// at the maximal shock.
    Rule(String),
}

pub const FULL_LIQUIDATION: &str = "full-liquidation";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// `N×M` units of each asset held by each bank.
    pub holdings: Vec<Vec<f64>>,
    pub liability_low: Vec<f64>,
    pub liability_high: Vec<f64>,
    pub capital_threshold: f64,
    pub leverage_sensitivity: Sensitivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdfConfig {
    pub kind: IdfKind,
    #[serde(default)]
    pub base_price: Option<Vec<f64>>,
    /// Per-asset impact for the separable kinds.
    #[serde(default)]
    pub impact: Option<Vec<f64>>,
    /// `M×M` impact matrix for `linear-cross`.
    #[serde(default)]
    pub cross_impact: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train_count: usize,
    pub test_count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Variant trained by `train`.
    pub variant: Variant,
    /// Variants trained and compared by `repro`.
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub system: SystemConfig,
    pub idf: IdfConfig,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub architecture: Architecture,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Validation(vec![e.message().to_string()]))?;
        let problems = cfg.validate();
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn preset(case: &str) -> Result<Self> {
        let text = CASES
            .iter()
            .find(|(n, _)| *n == case)
            .map(|(_, t)| *t)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("unknown case {case:?}; expected one of {}", case_names().join(", ")))
            })?;
        Self::from_toml(text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    /// Replaces every seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.data.seed = seed;
        self.train.seed = seed;
        self
    }

    /// Every problem found, each naming its field.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let s = &self.system;
        let n = s.holdings.len();
        if n == 0 {
            problems.push("system.holdings: at least one bank is required".into());
        }
        for (name, v) in [("liability_low", &s.liability_low), ("liability_high", &s.liability_high)] {
            if v.len() != n {
                problems.push(format!("system.{name}: expected {n} entries, got {}", v.len()));
            }
        }
        if s.liability_low.len() == s.liability_high.len() {
            for (i, (lo, hi)) in s.liability_low.iter().zip(&s.liability_high).enumerate() {
                if !(lo < hi) {
                    problems.push(format!(
                        "system.liability_low: bank {i} low {lo} must be below liability_high {hi}"
                    ));
                }
            }
        }
        match &s.leverage_sensitivity {
            Sensitivity::Value(k) if !(k.is_finite() && *k > 0.0) => {
                problems.push("system.leverage_sensitivity: must be positive".into())
            }
            Sensitivity::Rule(r) if r != FULL_LIQUIDATION => problems.push(format!(
                "system.leverage_sensitivity: expected a number or {FULL_LIQUIDATION:?}, got {r:?}"
            )),
            _ => {}
        }
        if self.data.train_count < 2 {
            problems.push("data.train_count: need at least 2 samples".into());
        }
        if self.data.test_count < 2 {
            problems.push("data.test_count: need at least 2 samples".into());
        }
        if self.model.variants.is_empty() {
            problems.push("model.variants: list at least one variant".into());
        }
        problems.extend(self.train.validate());
        problems.extend(self.architecture.validate());
        if problems.is_empty() {
            if let Err(e) = self.build() {
                problems.extend(match e {
                    Error::Validation(p) => p,
                    other => vec![other.to_string()],
                });
            }
        }
        problems
    }

    pub fn supply(&self) -> Vec<f64> {
        let m = self.system.holdings.first().map_or(0, Vec::len);
        (0..m)
            .map(|j| self.system.holdings.iter().map(|r| r.get(j).copied().unwrap_or(0.0)).sum())
            .collect()
    }

    pub fn idf_spec(&self) -> Result<IdfSpec> {
        let supply = self.supply();
        let m = supply.len();
        let base = self.idf.base_price.clone().unwrap_or_else(|| vec![1.0; m]);
        match self.idf.kind {
            IdfKind::LinearCross => {
                let d = self.idf.cross_impact.clone().ok_or_else(|| {
                    Error::Validation(vec!["idf.cross_impact: required for linear-cross".into()])
                })?;
                IdfSpec::linear_cross(base, d, supply)
            }
            kind => {
                let default = if kind == IdfKind::Arctangent { 0.0 } else { crate::idf::DEFAULT_IMPACT };
                let impact = self.idf.impact.clone().unwrap_or_else(|| vec![default; m]);
                IdfSpec::separable(kind, base, impact, supply)
            }
        }
    }

    /// Banking system and inverse demand function described by the config.
    pub fn build(&self) -> Result<(BankingSystem, IdfSpec)> {
        let spec = self.idf_spec()?;
        let s = &self.system;
        let kappa = match &s.leverage_sensitivity {
            Sensitivity::Value(k) => *k,
            Sensitivity::Rule(_) => {
                BankingSystem::full_liquidation_sensitivity(&s.holdings, &s.liability_high, s.capital_threshold, &spec)?
            }
        };
        let sys = BankingSystem::new(
            s.holdings.clone(),
            s.liability_low.clone(),
            s.liability_high.clone(),
            s.capital_threshold,
            kappa,
        )?;
        Ok((sys, spec))
    }

    /// Hash of everything that determines the generated dataset.
    pub fn data_hash(&self) -> String {
        #[derive(Serialize)]
        struct DataDefining<'a> {
            system: &'a SystemConfig,
            idf: &'a IdfConfig,
            data: &'a DataConfig,
        }
        let canonical = serde_json::to_string(&DataDefining {
            system: &self.system,
            idf: &self.idf,
            data: &self.data,
        })
        .expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
