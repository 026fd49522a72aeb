//! Per-query routing: featurize, pick an arm, decode with it.
//!
//! Reported time covers decoding plus policy inference. Featurization is timed
//! but excluded, since in a real deployment the query representation comes from
//! the target's first pass and is reused for verification.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::dataset::{validate_arms, ArmKind, ArmSpec};
use crate::dist::{argmax, seeded_rng, DrawSource};
use crate::error::{invalid, Result};
use crate::ngram::{GenerationOutput, NGramModel};
use crate::policy::{FeatureVector, Featurizer, PolicyParams};
use crate::specdec::{autoregressive_decode, greedy_assisted_decode, speculative_decode, DecodeConfig, DecodeStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SelectionMode {
    /// Argmax of the policy, lowest index on ties.
    Greedy,
    /// Sample from the policy.
    Dynamic,
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMode::Greedy => "greedy",
            SelectionMode::Dynamic => "dynamic",
        })
    }
}

impl FromStr for SelectionMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(SelectionMode::Greedy),
            "dynamic" => Ok(SelectionMode::Dynamic),
            other => Err(invalid(format!("unknown selection mode {other:?}"))),
        }
    }
}

/// Chooses an arm from the policy's distribution over `x`.
pub fn select_arm_from_features<D: DrawSource + ?Sized>(
    params: &PolicyParams,
    x: &FeatureVector,
    mode: SelectionMode,
    draws: &mut D,
) -> Result<(usize, Vec<f64>)> {
    let probs = params.forward(x)?;
    let arm = match mode {
        SelectionMode::Greedy => argmax(&probs),
        SelectionMode::Dynamic => draws.pick(&probs),
    };
    Ok((arm, probs))
}

pub fn select_arm<F: Featurizer + ?Sized, D: DrawSource + ?Sized>(
    params: &PolicyParams,
    featurizer: &F,
    query_text: &str,
    mode: SelectionMode,
    draws: &mut D,
) -> Result<(usize, Vec<f64>)> {
    select_arm_from_features(params, &featurizer.featurize(query_text), mode, draws)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutedResult {
    pub arm_index: usize,
    pub arm_id: String,
    pub output: GenerationOutput,
    pub stats: DecodeStats,
    pub policy_probs: Vec<f64>,
}

/// Decodes `prompt` with one arm: drafter arms use speculative sampling (greedy
/// assisted decoding at `T = 0`), the autoregressive arm uses the target alone.
/// Sampling draws from an RNG seeded by `cfg.seed`.
pub fn decode_with_arm(
    arm: &ArmSpec,
    target: &NGramModel,
    prompt: &[crate::TokenId],
    cfg: &DecodeConfig,
) -> Result<(GenerationOutput, DecodeStats)> {
    let mut rng = seeded_rng(cfg.seed);
    match &arm.kind {
        ArmKind::Drafter(draft) if cfg.temperature == 0.0 => greedy_assisted_decode(target, draft, prompt, cfg),
        ArmKind::Drafter(draft) => speculative_decode(target, draft, prompt, cfg, &mut rng),
        ArmKind::Autoregressive => autoregressive_decode(target, prompt, cfg, &mut rng),
    }
}

/// A trained policy bound to its arms and target.
pub struct Router<'a, F: Featurizer> {
    pub params: &'a PolicyParams,
    pub featurizer: F,
    pub arms: &'a [ArmSpec],
    pub target: &'a NGramModel,
}

impl<'a, F: Featurizer> Router<'a, F> {
    pub fn new(params: &'a PolicyParams, featurizer: F, arms: &'a [ArmSpec], target: &'a NGramModel) -> Result<Self> {
        validate_arms(arms)?;
        params.check_shapes()?;
        if params.arms != arms.len() {
            return Err(invalid(format!(
                "policy has {} outputs but {} arms are configured",
                params.arms,
                arms.len()
            )));
        }
        if featurizer.dim() != params.input_dim {
            return Err(invalid("featurizer dimension does not match the policy"));
        }
        Ok(Self {
            params,
            featurizer,
            arms,
            target,
        })
    }

    /// Selects an arm with `draws` and decodes with it. The decode itself is
    /// seeded from `cfg.seed`, so a routed run reproduces the fixed-arm run for
    /// the same query and seed.
    pub fn route_and_decode<D: DrawSource + ?Sized>(
        &self,
        query_text: &str,
        cfg: &DecodeConfig,
        mode: SelectionMode,
        draws: &mut D,
    ) -> Result<RoutedResult> {
        let prompt = self.target.vocab().encode(query_text)?;

        let t0 = Instant::now();
        let x = self.featurizer.featurize(query_text);
        let featurize_ns = t0.elapsed().as_nanos() as u64;

        let t1 = Instant::now();
        let (arm_index, policy_probs) = select_arm_from_features(self.params, &x, mode, draws)?;
        let policy_ns = t1.elapsed().as_nanos() as u64;

        let arm = &self.arms[arm_index];
        let (output, mut stats) = decode_with_arm(arm, self.target, &prompt, cfg)?;
        stats.wall_ns_featurize = featurize_ns;
        stats.wall_ns_policy = policy_ns;
        stats.wall_ns_total = stats.wall_ns_decode + policy_ns;
        Ok(RoutedResult {
            arm_index,
            arm_id: arm.arm_id.clone(),
            output,
            stats,
            policy_probs,
        })
    }
}
