//! Mini-batch Adam training with dev-set early stopping, and MAE/MSE evaluation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{BatchPlan, Dataset, Split};
use crate::error::{Error, Result};
use crate::model::{Model, ModelSpec, DEFAULT_ALPHA, DEFAULT_DROPOUT};
use crate::nn::{AdamConfig, LossBreakdown};

const EVAL_CHUNK: usize = 64;

/// Weights and biases of every layer, in declaration order.
type Snapshot = Vec<(Vec<f64>, Vec<f64>)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Weight of the Bhattacharyya term; only used by `BatchFusion`.
    pub alpha: f64,
    /// Epochs without dev improvement before stopping; 0 disables early stopping.
    pub patience: usize,
    pub seed: u64,
    pub dropout_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 32,
            max_epochs: 50,
            alpha: DEFAULT_ALPHA,
            patience: 10,
            seed: 0,
            dropout_rate: DEFAULT_DROPOUT,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch size and max epochs must be positive".into()));
        }
        if self.alpha.is_nan() || self.alpha < 0.0 {
            return Err(Error::Config(format!("alpha {} must be non-negative", self.alpha)));
        }
        if self.patience > self.max_epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds max epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate {} outside [0, 1)", self.dropout_rate)));
        }
        Ok(())
    }

    /// The spec actually trained: seed, dropout and alpha come from this config.
    pub fn apply_to(&self, spec: &ModelSpec) -> ModelSpec {
        spec.clone()
            .with_seed(self.seed)
            .with_dropout(self.dropout_rate)
            .with_alpha(self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss breakdown per epoch.
    pub epochs: Vec<LossBreakdown>,
    pub dev_mse: Vec<f64>,
    /// 1-based epoch whose weights were restored.
    pub best_epoch: usize,
    /// Number of epochs actually run.
    pub stopped_epoch: usize,
    pub test_metrics: BTreeMap<String, Metrics>,
    pub seed: u64,
}

impl TrainReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn best_dev_mse(&self) -> f64 {
        self.dev_mse[self.best_epoch - 1]
    }
}

/// Loss of one optimizer step, as seen by a training observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLog {
    pub epoch: usize,
    pub batch: usize,
    pub loss: LossBreakdown,
}

pub fn train(spec: &ModelSpec, data: &Dataset, config: &TrainConfig) -> Result<(Model, TrainReport)> {
    train_with_observer(spec, data, config, |_| {})
}

pub fn train_with_observer<F>(
    spec: &ModelSpec,
    data: &Dataset,
    config: &TrainConfig,
    mut observer: F,
) -> Result<(Model, TrainReport)>
where
    F: FnMut(&BatchLog),
{
    config.validate()?;
    let spec = config.apply_to(spec);
    spec.validate()?;
    if spec.dim_a != data.dim_a() || spec.dim_b != data.dim_b() {
        return Err(Error::Config(format!(
            "model expects dims ({}, {:?}) but data provides ({}, {:?})",
            spec.dim_a,
            spec.dim_b,
            data.dim_a(),
            data.dim_b()
        )));
    }
    data.check_consistency(&[Split::Train, Split::Dev])?;
    let train_ids: Vec<String> = data.split(Split::Train).iter().map(|l| l.clip_id.clone()).collect();
    if data.split(Split::Dev).is_empty() {
        return Err(Error::Data("dev split is empty; early stopping needs it".into()));
    }
    let plan = BatchPlan::new(train_ids, config.seed, config.batch_size)?;

    let mut model = Model::build(&spec)?;
    let adam = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    let mut epochs = Vec::new();
    let mut dev_mse = Vec::new();
    let mut best: Option<(usize, f64, Snapshot)> = None;
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        let batches = plan.batches(epoch as u64 - 1);
        let (mut mse_sum, mut bd_sum) = (0.0, 0.0);
        for (bi, ids) in batches.iter().enumerate() {
            let batch = data.batch(ids)?;
            model.zero_grad();
            let out = model.forward(&batch.a, batch.b.as_ref(), true)?;
            let loss = model.loss(&out, &batch.targets)?;
            if !loss.total.is_finite() {
                return Err(Error::NumericDivergence {
                    epoch,
                    batch: bi + 1,
                    value: loss.total,
                });
            }
            observer(&BatchLog {
                epoch,
                batch: bi + 1,
                loss,
            });
            model.backward(&out, &batch.targets)?;
            model.adam_step(&adam);
            mse_sum += loss.mse;
            bd_sum += loss.bd;
        }
        let nb = batches.len() as f64;
        epochs.push(LossBreakdown::new(mse_sum / nb, bd_sum / nb, model.alpha()));

        let dev = evaluate(&mut model, Split::Dev, data)?;
        dev_mse.push(dev.mse);
        let improved = best.as_ref().is_none_or(|(_, b, _)| dev.mse < *b);
        if improved {
            best = Some((epoch, dev.mse, snapshot(&model)));
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience > 0 && since_best >= config.patience {
                break;
            }
        }
    }

    let (best_epoch, _, weights) = best.expect("at least one epoch ran");
    restore(&mut model, &weights);
    let mut test_metrics = BTreeMap::new();
    for split in Split::TEST {
        if !data.split(split).is_empty() {
            test_metrics.insert(split.to_string(), evaluate(&mut model, split, data)?);
        }
    }
    let report = TrainReport {
        stopped_epoch: epochs.len(),
        epochs,
        dev_mse,
        best_epoch,
        test_metrics,
        seed: config.seed,
    };
    Ok((model, report))
}

fn snapshot(model: &Model) -> Snapshot {
    model
        .params()
        .iter()
        .map(|p| (p.weights.data().to_vec(), p.bias.data().to_vec()))
        .collect()
}

fn restore(model: &mut Model, weights: &Snapshot) {
    for (p, (w, b)) in model.params_mut().into_iter().zip(weights) {
        p.weights.data_mut().copy_from_slice(w);
        p.bias.data_mut().copy_from_slice(b);
    }
}

/// Eval-mode predictions for every clip of `split`, in manifest order.
pub fn predict_split(model: &mut Model, split: Split, data: &Dataset) -> Result<Vec<(String, f64, f64)>> {
    let clips = data.split(split);
    if clips.is_empty() {
        return Err(Error::Data(format!("split `{split}` is empty")));
    }
    data.check_consistency(&[split])?;
    let mut out = Vec::with_capacity(clips.len());
    for chunk in clips.chunks(EVAL_CHUNK) {
        let ids: Vec<&str> = chunk.iter().map(|l| l.clip_id.as_str()).collect();
        let batch = data.batch(&ids)?;
        let preds = model.predict(&batch.a, batch.b.as_ref())?;
        for ((id, p), t) in ids.iter().zip(preds).zip(&batch.targets) {
            out.push(((*id).to_owned(), p, *t));
        }
    }
    Ok(out)
}

/// MAE and MSE of eval-mode predictions on `split`.
pub fn evaluate(model: &mut Model, split: Split, data: &Dataset) -> Result<Metrics> {
    let rows = predict_split(model, split, data)?;
    let n = rows.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (_, p, t) in &rows {
        abs += (p - t).abs();
        sq += (p - t) * (p - t);
    }
    Ok(Metrics {
        mae: abs / n,
        mse: sq / n,
    })
}

/// MAE of always predicting the train-split mean MOS, on `split`.
pub fn constant_mean_mae(data: &Dataset, split: Split) -> Result<f64> {
    let train = data.split(Split::Train);
    let target = data.split(split);
    if train.is_empty() || target.is_empty() {
        return Err(Error::Data("constant baseline needs non-empty splits".into()));
    }
    let mean = train.iter().map(|l| l.mos).sum::<f64>() / train.len() as f64;
    Ok(target.iter().map(|l| (l.mos - mean).abs()).sum::<f64>() / target.len() as f64)
}
