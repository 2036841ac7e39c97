//! Single-threaded, seeded training loop (one recording per update).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid_arg, Result};
use crate::metrics::DeAccumulator;
use crate::tracks::{ActivityTrack, DoaTrack};

use super::adam::{adam_step, AdamConfig, AdamState, LrSchedule};
use super::augment::AugPattern;
use super::features::FeatureTensor;
use super::layers::Mode;
use super::network::Network;
use super::objective::{doa_track_from_output, objective};

#[derive(Debug, Clone)]
pub struct TrainExample {
    pub features: FeatureTensor,
    pub gt_doa: DoaTrack,
    pub gt_activity: ActivityTrack,
}

impl TrainExample {
    pub fn new(features: FeatureTensor, gt_doa: DoaTrack, gt_activity: ActivityTrack) -> Result<Self> {
        let t = features.frames();
        if gt_doa.len() != t || gt_activity.len() != t {
            return Err(invalid_arg(format!("labels cover {} / {} frames, features {}", gt_doa.len(), gt_activity.len(), t)));
        }
        Ok(Self { features, gt_doa, gt_activity })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    pub schedule: LrSchedule,
    pub adam: AdamConfig,
    /// Draw one of the 16 rotation/reflection patterns per example and step.
    pub augment: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, seed: 0, schedule: LrSchedule::default(), adam: AdamConfig::default(), augment: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub loss_doa: f64,
    pub loss_sad: f64,
    /// Mean DOA error in degrees on the validation set (NaN without one).
    pub val_de: f64,
}

/// Mean angular error (degrees) of the unsmoothed network track over
/// ground-truth active frames, pooled across examples.
pub fn evaluate_de(net: &Network, examples: &[TrainExample]) -> Result<f64> {
    let mut acc = DeAccumulator::default();
    for ex in examples {
        let (out, _) = net.forward(&ex.features, Mode::Infer)?;
        let (est, _) = doa_track_from_output(&out)?;
        acc.add(&ex.gt_doa, &est, &ex.gt_activity)?;
    }
    acc.mean()
}

/// Trains `net` in place. `on_epoch` sees each log line as it is produced.
pub fn train(
    net: &mut Network,
    train_set: &[TrainExample],
    val_set: &[TrainExample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    if train_set.is_empty() {
        return Err(invalid_arg("training set is empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(&net.params(), cfg.adam);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        // schedule is indexed by the 1-based epoch number that appears in the log
        let lr = cfg.schedule.lr_at(epoch + 1);
        order.shuffle(&mut rng);
        let (mut loss, mut loss_doa, mut loss_sad) = (0.0, 0.0, 0.0);
        for &i in &order {
            let ex = &train_set[i];
            let pattern = if cfg.augment { AugPattern::from_id(rng.gen_range(0..AugPattern::COUNT)).expect("valid id") } else { AugPattern::IDENTITY };
            let (x, gt) = if pattern == AugPattern::IDENTITY {
                (ex.features.clone(), ex.gt_doa.clone())
            } else {
                (pattern.apply_features(&ex.features), pattern.apply_track(&ex.gt_doa))
            };
            let (out, cache) = net.forward(&x, Mode::Train)?;
            let (parts, og) = objective(&out, &gt, &ex.gt_activity)?;
            let grads = net.backward(cache.as_ref(), &out, &og)?;
            adam_step(&mut net.params_mut(), &grads.tensors, &mut adam, lr)?;
            if let Some(c) = &cache {
                net.absorb_batch_stats(c);
            }
            loss += parts.total;
            loss_doa += parts.doa;
            loss_sad += parts.sad;
        }
        let n = train_set.len() as f64;
        let val_de = if val_set.is_empty() { f64::NAN } else { evaluate_de(net, val_set).unwrap_or(f64::NAN) };
        let log = EpochLog { epoch: epoch + 1, lr, loss: loss / n, loss_doa: loss_doa / n, loss_sad: loss_sad / n, val_de };
        on_epoch(&log);
        logs.push(log);
    }
    Ok(logs)
}
