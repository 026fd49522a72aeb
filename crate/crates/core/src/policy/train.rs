use std::collections::HashMap;

use rand::seq::SliceRandom;

use super::featurize::{FeatureVector, Featurizer};
use super::mlp::{reinforce_grad, BanditSample, PolicyParams};
use super::optim::{AdamW, Optimizer, OptimizerKind, Sgd};
use crate::dataset::RewardSet;
use crate::dist::seeded_rng;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Subtract the minibatch mean reward. Off by default.
    pub mean_baseline: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3,
            batch_size: 64,
            learning_rate: 1e-3,
            weight_decay: 1e-2,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
            seed: 0,
            optimizer: OptimizerKind::AdamW,
            mean_baseline: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(invalid("epochs and batch_size must be >= 1"));
        }
        let positive = [self.learning_rate, self.epsilon];
        if positive.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(invalid("learning rate and epsilon must be positive"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(invalid("weight decay must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("betas must be in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPolicy {
    pub params: PolicyParams,
    /// Mean minibatch loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Offline REINFORCE over every logged (query, arm, reward) tuple.
///
/// Each epoch shuffles the records and takes one optimizer step per minibatch.
/// Initialization and shuffling both draw from one RNG seeded by `cfg.seed`.
pub fn train<F: Featurizer + ?Sized>(
    dataset: &RewardSet,
    featurizer: &F,
    hidden: usize,
    cfg: &TrainConfig,
) -> Result<TrainedPolicy> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(invalid("cannot train on an empty dataset"));
    }
    if hidden < 1 {
        return Err(invalid("hidden width must be >= 1"));
    }
    let k = dataset.k;
    let mut arm_ids: Vec<Option<&str>> = vec![None; k];
    for r in &dataset.records {
        if r.arm_index >= k {
            return Err(invalid(format!("record arm_index {} >= k={k}", r.arm_index)));
        }
        match arm_ids[r.arm_index] {
            None => arm_ids[r.arm_index] = Some(&r.arm_id),
            Some(id) if id != r.arm_id => {
                return Err(invalid(format!(
                    "arm index {} maps to both {id:?} and {:?}",
                    r.arm_index, r.arm_id
                )))
            }
            Some(_) => {}
        }
    }
    let mut seen: Vec<&str> = arm_ids.iter().flatten().copied().collect();
    seen.sort_unstable();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("two arm indices share one arm_id"));
    }

    let mut cache: HashMap<&str, usize> = HashMap::new();
    let mut features: Vec<FeatureVector> = Vec::new();
    let feature_of: Vec<usize> = dataset
        .records
        .iter()
        .map(|r| {
            *cache.entry(r.query_text.as_str()).or_insert_with(|| {
                features.push(featurizer.featurize(&r.query_text));
                features.len() - 1
            })
        })
        .collect();

    let mut rng = seeded_rng(cfg.seed);
    let mut params = PolicyParams::init(featurizer.dim(), hidden, k, &mut rng);
    let mut opt: Box<dyn Optimizer> = match cfg.optimizer {
        OptimizerKind::AdamW => Box::new(AdamW::new(
            &params,
            cfg.learning_rate,
            cfg.beta1,
            cfg.beta2,
            cfg.epsilon,
            cfg.weight_decay,
        )),
        OptimizerKind::Sgd => Box::new(Sgd::new(cfg.learning_rate, cfg.weight_decay)),
    };

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let baseline = if cfg.mean_baseline {
                chunk.iter().map(|&i| dataset.records[i].reward).sum::<f64>() / chunk.len() as f64
            } else {
                0.0
            };
            let batch: Vec<BanditSample<'_>> = chunk
                .iter()
                .map(|&i| {
                    let r = &dataset.records[i];
                    BanditSample {
                        features: &features[feature_of[i]],
                        arm: r.arm_index,
                        reward: r.reward - baseline,
                    }
                })
                .collect();
            let (grad, loss) = reinforce_grad(&params, &batch)?;
            opt.step(&mut params, &grad);
            total += loss;
            batches += 1;
        }
        epoch_losses.push(total / batches as f64);
    }
    Ok(TrainedPolicy {
        params,
        epoch_losses,
    })
}
