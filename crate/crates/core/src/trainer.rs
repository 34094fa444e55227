//! Single-task training: mini-batch SGD with momentum and coupled weight
//! decay under a step learning-rate schedule.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Axis;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::centroids::CentroidSet;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::loss::{pedcc_loss, LossConfig};
use crate::netcore::{init_network, DenseLayer, Gradients, NetworkModel, NetworkSpec};
use crate::ClassId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    /// Epoch indices (0-based) from which the rate is divided once more.
    pub lr_drop_epochs: Vec<usize>,
    pub lr_drop_factor: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub loss: LossConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::full_schedule()
    }
}

impl TrainConfig {
    /// 120 epochs, batch 256, lr 0.1 divided by 10 at epochs 20/50/80/100,
    /// momentum 0.9, weight decay 5e-4.
    pub fn full_schedule() -> Self {
        Self {
            epochs: 120,
            batch_size: 256,
            base_lr: 0.1,
            lr_drop_epochs: vec![20, 50, 80, 100],
            lr_drop_factor: 10.0,
            momentum: 0.9,
            weight_decay: 5e-4,
            loss: LossConfig::default(),
            seed: 0,
        }
    }

    /// Same recipe with the drop epochs rescaled proportionally to `epochs`.
    pub fn scaled_to(&self, epochs: usize) -> Self {
        let mut drops: Vec<usize> = self
            .lr_drop_epochs
            .iter()
            .map(|&d| ((d * epochs) as f64 / self.epochs as f64).round() as usize)
            .filter(|&d| d > 0 && d < epochs)
            .collect();
        drops.dedup();
        Self {
            epochs,
            lr_drop_epochs: drops,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch_size must be at least 1".to_string(),
            ));
        }
        if !(self.base_lr > 0.0) || !(self.lr_drop_factor > 0.0) {
            return Err(Error::Config(
                "base_lr and lr_drop_factor must be positive".to_string(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(
                "weight_decay must be non-negative".to_string(),
            ));
        }
        if self.lr_drop_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "lr_drop_epochs must be strictly increasing".to_string(),
            ));
        }
        if self
            .lr_drop_epochs
            .last()
            .is_some_and(|&d| d >= self.epochs)
        {
            return Err(Error::Config(
                "lr_drop_epochs must be below epochs".to_string(),
            ));
        }
        self.loss.validate()
    }
}

/// Learning rate in effect during `epoch`; a listed drop applies from that
/// epoch onward.
pub fn lr_at_epoch(cfg: &TrainConfig, epoch: usize) -> Result<f64> {
    if epoch >= cfg.epochs {
        return Err(Error::Domain(format!(
            "epoch {epoch} outside 0..{}",
            cfg.epochs
        )));
    }
    let drops = cfg.lr_drop_epochs.iter().filter(|&&d| d <= epoch).count();
    let mut lr = cfg.base_lr;
    for _ in 0..drops {
        lr /= cfg.lr_drop_factor;
    }
    Ok(lr)
}

/// `v <- momentum * v + grad + weight_decay * param; param <- param - lr * v`.
pub fn sgd_update(
    params: &mut [DenseLayer],
    grads: &Gradients,
    velocity: &mut Gradients,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    if !grads.matches(params) || !velocity.matches(params) {
        return Err(Error::Contract(
            "gradient or velocity shapes do not match parameters".to_string(),
        ));
    }
    let (mu, wd) = (cfg.momentum, cfg.weight_decay);
    for ((p, g), v) in params
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut velocity.layers)
    {
        ndarray::Zip::from(&mut v.weight)
            .and(&g.weight)
            .and(&p.weight)
            .for_each(|v, &g, &p| *v = mu * *v + g + wd * p);
        ndarray::Zip::from(&mut v.bias)
            .and(&g.bias)
            .and(&p.bias)
            .for_each(|v, &g, &p| *v = mu * *v + g + wd * p);
        p.weight.scaled_add(-lr, &v.weight);
        p.bias.scaled_add(-lr, &v.bias);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Sample-weighted mean of the total loss over the epoch's batches.
    pub mean_loss: f64,
    pub am_loss: f64,
    /// Mean per-sample centroid-regression term before the root.
    pub mse_loss: f64,
    /// Accuracy of the batch predictions made during the epoch.
    pub train_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
}

impl TrainTrace {
    pub const CSV_HEADER: &'static str = "epoch,lr,mean_loss,am_loss,mse_loss,train_accuracy";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{:e},{:.8},{:.8},{:.8},{:.6}",
                r.epoch, r.lr, r.mean_loss, r.am_loss, r.mse_loss, r.train_accuracy
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

const SHUFFLE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Trains a fresh network on `data` with label map `data.class_set()`.
///
/// Only the current task's data enters training.
pub fn train_task(
    data: &LabeledDataset,
    head: &CentroidSet,
    spec: &NetworkSpec,
    cfg: &TrainConfig,
) -> Result<(NetworkModel, TrainTrace)> {
    train_task_with_labels(data, head, data.class_set().to_vec(), spec, cfg)
}

/// Like [`train_task`] with an explicit local-to-global label map.
pub fn train_task_with_labels(
    data: &LabeledDataset,
    head: &CentroidSet,
    label_map: Vec<ClassId>,
    spec: &NetworkSpec,
    cfg: &TrainConfig,
) -> Result<(NetworkModel, TrainTrace)> {
    cfg.validate()?;
    if head.n_classes() != label_map.len() {
        return Err(Error::Coverage(format!(
            "head has {} centroids but the label map covers {} classes",
            head.n_classes(),
            label_map.len()
        )));
    }
    let local: HashMap<ClassId, usize> =
        label_map.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let mut targets = Vec::with_capacity(data.len());
    let mut per_class = vec![0usize; label_map.len()];
    for &g in data.labels() {
        let l = *local.get(&g).ok_or_else(|| {
            Error::Coverage(format!("data contains class {g} outside the label map"))
        })?;
        per_class[l] += 1;
        targets.push(l);
    }
    if let Some(missing) = per_class.iter().position(|&c| c == 0) {
        return Err(Error::Coverage(format!(
            "class {} has no training samples",
            label_map[missing]
        )));
    }
    if data.dim() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            what: "data width vs network input",
            expected: spec.input_dim,
            found: data.dim(),
        });
    }

    let mut model = init_network(spec, head.clone(), label_map, cfg.seed)?;
    let mut velocity = Gradients::zeros_like(model.layers());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = TrainTrace::default();
    let n = data.len() as f64;

    for epoch in 0..cfg.epochs {
        let lr = lr_at_epoch(cfg, epoch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_SALT);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let (mut loss_sum, mut am_sum, mut mse_sum, mut correct) = (0.0, 0.0, 0.0, 0usize);
        for idx in order.chunks(cfg.batch_size) {
            let batch = data.features().select(Axis(0), idx);
            let labels: Vec<usize> = idx.iter().map(|&i| targets[i]).collect();
            let (features, cache) = model.forward(batch.view())?;
            if features.iter().any(|f| !f.is_finite()) {
                return Err(Error::TrainingDiverged { epoch });
            }
            let value = match pedcc_loss(features.view(), &labels, head, &cfg.loss) {
                Err(Error::DegenerateFeature { .. }) => {
                    return Err(Error::TrainingDiverged { epoch })
                }
                other => other?,
            };
            if !value.total.is_finite() || value.grad_wrt_features.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDiverged { epoch });
            }
            let b = idx.len() as f64;
            loss_sum += value.total * b;
            am_sum += value.am_component * b;
            mse_sum += value.mse_component_raw;
            correct += value
                .logits
                .axis_iter(Axis(0))
                .zip(&labels)
                .filter(|(row, &y)| argmax(row.iter().copied()) == y)
                .count();
            let grads = model.backward(&cache, value.grad_wrt_features.view())?;
            sgd_update(model.layers_mut(), &grads, &mut velocity, lr, cfg)?;
        }
        trace.records.push(EpochRecord {
            epoch,
            lr,
            mean_loss: loss_sum / n,
            am_loss: am_sum / n,
            mse_loss: mse_sum / n,
            train_accuracy: correct as f64 / n,
        });
    }
    model.snap_to_f32();
    Ok((model, trace))
}

/// Index of the first maximum.
pub(crate) fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}
