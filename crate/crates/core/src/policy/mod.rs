//! Query featurization, the softmax MLP routing policy and offline REINFORCE.

mod featurize;
mod mlp;
mod optim;
mod train;

pub use featurize::{featurize, FeatureVector, Featurizer, HashedNgramFeaturizer, DEFAULT_FEATURE_DIM};
pub use mlp::{reinforce_grad, reinforce_loss, BanditSample, PolicyParams, DEFAULT_HIDDEN};
pub use optim::{AdamW, Optimizer, OptimizerKind, Sgd};
pub use train::{train, TrainConfig, TrainedPolicy};
