//! Projected Adam on the price MSE.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::net::{DualModel, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub early_stop_patience: usize,
    /// Share of the training set held out for early stopping.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 2000,
            batch_size: 256,
            seed: 0,
            early_stop_patience: 200,
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            problems.push("train.learning_rate: must be positive".to_string());
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                problems.push(format!("train.{name}: must lie in [0, 1)"));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            problems.push("train.epsilon: must be positive".to_string());
        }
        if self.epochs == 0 {
            problems.push("train.epochs: must be at least 1".to_string());
        }
        if self.batch_size == 0 {
            problems.push("train.batch_size: must be at least 1".to_string());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            problems.push("train.validation_fraction: must lie in [0, 1)".to_string());
        }
        problems
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters the model was left at.
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub steps: u64,
    pub stopped_early: bool,
    pub train_samples: usize,
    pub validation_samples: usize,
}

impl TrainReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("epoch,train_mse,val_mse\n");
        for r in &self.history {
            out.push_str(&format!("{},{:.16e},{:.16e}\n", r.epoch, r.train_mse, r.val_mse));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Adam with bias correction over the model's parameter list.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: &TrainConfig, model: &mut DualModel) -> Self {
        let sizes: Vec<usize> = model.parameters_mut().iter().map(|(t, _)| t.len()).collect();
        Adam {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One Adam update followed by projection of the weights onto `[0, ∞)`.
    pub fn step(&mut self, model: &mut DualModel, grads: &[Tensor]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (k, (param, is_weight)) in model.parameters_mut().into_iter().enumerate() {
            let g = grads[k].data();
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, p) in param.data_mut().iter_mut().enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
                if is_weight && *p < 0.0 {
                    *p = 0.0;
                }
            }
        }
        debug_assert!(model.is_feasible());
    }
}

/// Inputs of the model for a subset of a dataset.
pub struct Batch {
    pub shocks: Tensor,
    pub prices: Tensor,
    pub true_liq: Option<Tensor>,
}

impl Batch {
    pub fn gather(all: &Batch, idx: &[usize]) -> Batch {
        Batch {
            shocks: Dataset::gather(&all.shocks, idx),
            prices: Dataset::gather(&all.prices, idx),
            true_liq: all.true_liq.as_ref().map(|t| Dataset::gather(t, idx)),
        }
    }

    pub fn len(&self) -> usize {
        self.shocks.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The inputs `model` needs from `data`.
pub fn model_inputs(model: &DualModel, data: &Dataset) -> Result<Batch> {
    if data.banks() != model.banks() || data.assets() != model.assets() {
        return Err(Error::Contract(format!(
            "dataset has {} banks and {} assets, model expects {} and {}",
            data.banks(),
            data.assets(),
            model.banks(),
            model.assets()
        )));
    }
    let true_liq = match model.variant() {
        Variant::Inclusive => Some(data.bank_liquidations().ok_or_else(|| {
            Error::Contract("inclusive model needs a dataset with gamma columns".into())
        })?),
        _ => None,
    };
    Ok(Batch {
        shocks: data.shocks(),
        prices: data.prices(),
        true_liq,
    })
}

/// MSE on `batch` and its gradient for every parameter, in
/// [`DualModel::parameters_mut`] order.
pub fn loss_and_gradients(model: &DualModel, batch: &Batch) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let traced = model.trace(&mut tape, &batch.shocks, batch.true_liq.as_ref())?;
    let loss = tape.mse(traced.p_hat, &batch.prices)?;
    let value = tape.value(loss).data()[0];
    let grads = tape.backward(loss)?;
    let out = traced.params.iter().map(|&p| grads.wrt(&tape, p)).collect();
    Ok((value, out))
}

pub fn batch_mse(model: &DualModel, batch: &Batch) -> Result<f64> {
    let out = model.forward(&batch.shocks, batch.true_liq.as_ref())?;
    crate::autodiff::mse(&out.p_hat, &batch.prices)
}

fn non_finite(what: &str, epoch: usize, lr: f64) -> Error {
    Error::Numerical(format!(
        "{what} became non-finite in epoch {epoch}; try a learning rate below {lr:e}"
    ))
}

/// Trains `model` on `data` and leaves it at the best-validation snapshot.
pub fn train(model: &mut DualModel, data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("training data is empty".into()));
    }
    let all = model_inputs(model, data)?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n_val = ((data.len() as f64) * cfg.validation_fraction).round() as usize;
    let n_val = n_val.min(data.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let train_set = Batch::gather(&all, train_idx);
    let val_set = (n_val > 0).then(|| Batch::gather(&all, val_idx));

    model.clamp();
    let mut adam = Adam::new(cfg, model);
    let mut best = model.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut steps = 0u64;
    let mut stopped_early = false;
    let mut idx: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        idx.sort_unstable();
        idx.shuffle(&mut rng);

        let mut sse = 0.0;
        for chunk in idx.chunks(cfg.batch_size) {
            let batch = Batch::gather(&train_set, chunk);
            let (loss, grads) = loss_and_gradients(model, &batch)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(non_finite("training loss", epoch, cfg.learning_rate));
            }
            sse += loss * chunk.len() as f64;
            adam.step(model, &grads);
            steps += 1;
        }
        let train_mse = sse / train_set.len() as f64;
        let val_mse = match &val_set {
            Some(v) => batch_mse(model, v)?,
            None => batch_mse(model, &train_set)?,
        };
        if !val_mse.is_finite() {
            return Err(non_finite("validation loss", epoch, cfg.learning_rate));
        }
        history.push(EpochRecord {
            epoch,
            train_mse,
            val_mse,
        });
        if val_mse < best_val {
            best_val = val_mse;
            best_epoch = epoch;
            best.clone_from(model);
        } else if epoch - best_epoch >= cfg.early_stop_patience {
            stopped_early = true;
            break;
        }
    }
    *model = best;
    Ok(TrainReport {
        history,
        best_epoch,
        best_val_mse: best_val,
        steps,
        stopped_early,
        train_samples: train_set.len(),
        validation_samples: n_val,
    })
}
