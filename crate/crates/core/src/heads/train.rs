use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{gradient, loss, predict, HeadParams};
use super::{HeadConfig, HeadError, TrainRecord};
use crate::metrics::auroc;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 0 is the initialization, before any update.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// `None` when the validation set is empty or single-class.
    pub val_auroc: Option<f64>,
    /// Learning rate of the epoch's last step.
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<T: Real = f64> {
    pub params: HeadParams<T>,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

impl<T: Real> TrainOutcome<T> {
    pub fn best_val_auroc(&self) -> Option<f64> {
        self.log[self.best_epoch].val_auroc
    }
}

/// Learning rate at 0-based optimizer step `step`.
///
/// Ramps linearly from `warmup_factor * base` to `base` over
/// `warmup_steps`, constant afterwards.
pub fn learning_rate(config: &HeadConfig, step: usize) -> f64 {
    if step >= config.warmup_steps {
        return config.base_learning_rate;
    }
    let alpha = step as f64 / config.warmup_steps as f64;
    config.base_learning_rate * (config.warmup_factor * (1.0 - alpha) + alpha)
}

fn evaluate<T: Real>(params: &HeadParams<T>, config: &HeadConfig, val: &[TrainRecord<T>]) -> Result<(Option<f64>, Option<f64>), HeadError> {
    if val.is_empty() {
        return Ok((None, None));
    }
    let val_loss = loss(params, config, val)?.to_f64_lossy();
    let scores = predict(params, config, val)?;
    let labels: Vec<bool> = val.iter().map(|r| r.cancer_label).collect();
    Ok((Some(val_loss), auroc(&scores, &labels).ok().map(|a| a.to_f64_lossy())))
}

/// Mini-batch SGD with momentum and linear warmup.
///
/// Data are reshuffled every epoch from a generator seeded by
/// `config.seed`, which also seeds the initialization. The returned
/// parameters are those of the epoch with the highest validation AUROC
/// (earliest on ties, the initialization included); with no defined
/// validation AUROC the last epoch is kept.
pub fn train<T: Real>(config: &HeadConfig, train: &[TrainRecord<T>], val: &[TrainRecord<T>]) -> Result<TrainOutcome<T>, HeadError> {
    config.validate()?;
    if train.is_empty() {
        return Err(HeadError::EmptyData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = HeadParams::<T>::init(config, &mut rng);
    let mut velocity = HeadParams::<T>::zeros(config);

    let initial_loss = loss(&params, config, train)?.to_f64_lossy();
    let (val_loss, val_auroc) = evaluate(&params, config, val)?;
    let mut log = vec![EpochLog { epoch: 0, train_loss: initial_loss, val_loss, val_auroc, learning_rate: 0.0 }];
    let mut best = (0usize, val_auroc, params.clone());

    let momentum = T::lit(config.momentum);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0usize;
    let mut batch = Vec::with_capacity(config.batch_size);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut lr = 0.0;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            let grad = gradient(&params, config, &batch)?;
            lr = learning_rate(config, step);
            let lr_t = T::lit(lr);
            for ((p, v), g) in params.flat_mut().zip(velocity.flat_mut()).zip(grad.flat()) {
                *v = momentum * *v + g;
                *p -= lr_t * *v;
            }
            step += 1;
            if !params.is_finite() {
                return Err(HeadError::Diverged { epoch, step, value: f64::NAN });
            }
        }
        let train_loss = loss(&params, config, train)?.to_f64_lossy();
        if !train_loss.is_finite() {
            return Err(HeadError::Diverged { epoch, step, value: train_loss });
        }
        let (val_loss, val_auroc) = evaluate(&params, config, val)?;
        log.push(EpochLog { epoch, train_loss, val_loss, val_auroc, learning_rate: lr });
        let better = match (val_auroc, best.1) {
            (Some(a), Some(b)) => a > b,
            (Some(_), None) => true,
            (None, None) => true,
            (None, Some(_)) => false,
        };
        if better {
            best = (epoch, val_auroc, params.clone());
        }
    }
    Ok(TrainOutcome { params: best.2, best_epoch: best.0, log })
}
