//! Mini-batch gradient descent with optional momentum.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::{Dataset, Split};
use super::model::{add_grads, scale_grads, Gradients, KanModel, LossKind};
use crate::error::SplineError;
use crate::rng::substream;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub loss: LossKind,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            learning_rate: 0.05,
            momentum: 0.0,
            loss: LossKind::Mse,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub val: f64,
}

#[derive(Debug, Error)]
pub enum TrainError<T: Scalar> {
    #[error("training diverged in epoch {epoch}")]
    Diverged {
        epoch: usize,
        /// Model as of the end of the last finite epoch.
        checkpoint: Box<KanModel<T>>,
    },
    #[error("invalid training setup: {0}")]
    Invalid(String),
    #[error(transparent)]
    Spline(#[from] SplineError),
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: KanModel<T>,
    pub history: Vec<EpochLoss>,
}

/// Mean loss over every row of `data`.
pub fn evaluate<T: Scalar>(model: &KanModel<T>, data: &Dataset<T>, loss: LossKind) -> Result<T, SplineError> {
    if data.is_empty() {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    for r in 0..data.len() {
        total += model.loss(data.features(r), data.targets(r), loss)?;
    }
    Ok(total / T::from_usize_lossy(data.len()))
}

/// Train-split and val-split views; validation falls back to the training
/// rows when no row is tagged `val`.
pub fn split_views<T: Scalar>(data: &Dataset<T>) -> (Dataset<T>, Dataset<T>) {
    let train = data.subset(Split::Train);
    let val = data.subset(Split::Val);
    if val.is_empty() {
        (train.clone(), train)
    } else {
        (train, val)
    }
}

/// Stateful trainer; epochs are numbered globally so that training can be
/// split into windows and resumed without changing the shuffle order.
#[derive(Debug, Clone)]
pub struct Trainer<T: Scalar> {
    cfg: TrainConfig,
    velocity: Option<Gradients<T>>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(cfg: TrainConfig) -> Result<Self, TrainError<T>> {
        if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
            return Err(TrainError::Invalid("learning rate must be positive".into()));
        }
        if cfg.batch_size == 0 {
            return Err(TrainError::Invalid("batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&cfg.momentum) {
            return Err(TrainError::Invalid("momentum must lie in [0, 1)".into()));
        }
        Ok(Self { cfg, velocity: None })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// Drop momentum state (needed whenever the parameter shapes change).
    pub fn reset(&mut self) {
        self.velocity = None;
    }

    /// Run one epoch (global index `epoch`) over `train`, in place.
    pub fn epoch(
        &mut self,
        model: &mut KanModel<T>,
        train: &Dataset<T>,
        epoch: usize,
    ) -> Result<T, TrainError<T>> {
        if train.is_empty() {
            return Err(TrainError::Invalid("empty training split".into()));
        }
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut substream(self.cfg.seed, &[0x7472_6169_6e, epoch as u64]));
        let lr = T::lit(self.cfg.learning_rate);
        let mom = T::lit(self.cfg.momentum);
        let mut total = T::zero();
        for chunk in order.chunks(self.cfg.batch_size) {
            let xs: Vec<&[T]> = chunk.iter().map(|&r| train.features(r)).collect();
            let ts: Vec<&[T]> = chunk.iter().map(|&r| train.targets(r)).collect();
            let (l, g) = model.batch_loss_and_grad(&xs, &ts, self.cfg.loss)?;
            total += l * T::from_usize_lossy(chunk.len());
            let step = if self.cfg.momentum > 0.0 {
                let v = self.velocity.get_or_insert_with(|| Gradients::zeros_like(model));
                if v.coeffs.len() != g.coeffs.len()
                    || v.coeffs.iter().zip(&g.coeffs).any(|(a, b)| a.len() != b.len())
                {
                    *v = Gradients::zeros_like(model);
                }
                scale_grads(v, mom);
                add_grads(v, &g);
                v.clone()
            } else {
                g
            };
            model.apply_update(&step, lr);
        }
        Ok(total / T::from_usize_lossy(train.len()))
    }

    /// Train `epochs` epochs starting at global epoch `start`, recording losses.
    pub fn run(
        &mut self,
        model: &mut KanModel<T>,
        train: &Dataset<T>,
        val: &Dataset<T>,
        start: usize,
        epochs: usize,
    ) -> Result<Vec<EpochLoss>, TrainError<T>> {
        let mut history = Vec::with_capacity(epochs);
        let mut last_good = model.clone();
        for epoch in start..start + epochs {
            let tl = self.epoch(model, train, epoch)?;
            let vl = evaluate(model, val, self.cfg.loss)?;
            if !(tl.is_finite() && vl.is_finite() && model.all_finite()) {
                return Err(TrainError::Diverged {
                    epoch,
                    checkpoint: Box::new(last_good),
                });
            }
            last_good.clone_from(model);
            history.push(EpochLoss {
                epoch,
                train: tl.as_f64(),
                val: vl.as_f64(),
            });
        }
        Ok(history)
    }
}

/// Train a private copy of `model` on the dataset's train/val splits.
pub fn train<T: Scalar>(
    model: &KanModel<T>,
    data: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>, TrainError<T>> {
    if data.is_empty() {
        return Err(TrainError::Invalid("empty dataset".into()));
    }
    let (train, val) = split_views(data);
    let mut trainer = Trainer::new(cfg.clone())?;
    let mut model = model.clone();
    let history = trainer.run(&mut model, &train, &val, 0, cfg.epochs)?;
    Ok(TrainOutcome { model, history })
}
