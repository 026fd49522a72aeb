//! Token distributions, temperature scaling and the randomness abstraction used
//! by every sampler in the crate.

use std::hash::Hasher;

use fnv::FnvHasher;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::vocab::TokenId;

const NORMALIZATION_TOL: f64 = 1e-9;

/// Probability vector over a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    probs: Vec<f64>,
}

impl TokenDistribution {
    /// Validates non-negativity and normalization (within 1e-9).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("distribution over an empty vocabulary"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(invalid("distribution entries must be finite and non-negative"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(invalid(format!("distribution sums to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(invalid("weights must have a positive finite sum"));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(size: usize) -> Self {
        Self {
            probs: vec![1.0 / size as f64; size],
        }
    }

    pub fn one_hot(size: usize, index: TokenId) -> Self {
        let mut probs = vec![0.0; size];
        probs[index as usize] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, token: TokenId) -> f64 {
        self.probs[token as usize]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Most probable token; ties go to the lowest id.
    pub fn argmax(&self) -> TokenId {
        argmax(&self.probs) as TokenId
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self { probs }
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Sharpens or flattens a distribution: `T = 0` is the argmax one-hot, otherwise
/// `p^(1/T)` renormalized.
pub fn apply_temperature(dist: &TokenDistribution, temperature: f64) -> Result<TokenDistribution> {
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(invalid(format!("temperature must be >= 0, got {temperature}")));
    }
    if temperature == 0.0 {
        return Ok(TokenDistribution::one_hot(dist.len(), dist.argmax()));
    }
    if temperature == 1.0 {
        return Ok(dist.clone());
    }
    // log space keeps small probabilities from underflowing at low T
    let max_log = dist.probs[dist.argmax() as usize].ln();
    let weights: Vec<f64> = dist
        .probs
        .iter()
        .map(|&p| {
            if p > 0.0 {
                ((p.ln() - max_log) / temperature).exp()
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(TokenDistribution::from_raw(
        weights.into_iter().map(|w| w / total).collect(),
    ))
}

/// Source of categorical draws.
///
/// Every random decision in decoding and routing goes through [`pick`], which lets
/// tests replace the RNG with an exhaustive enumerator of all outcomes.
///
/// [`pick`]: DrawSource::pick
pub trait DrawSource {
    /// Returns an index `i` with probability `weights[i] / sum(weights)`.
    /// Zero-weight indices are never returned.
    fn pick(&mut self, weights: &[f64]) -> usize;

    fn bernoulli(&mut self, p: f64) -> bool {
        if p >= 1.0 {
            return true;
        }
        if p <= 0.0 {
            return false;
        }
        self.pick(&[1.0 - p, p]) == 1
    }
}

impl<R: RngCore + ?Sized> DrawSource for R {
    fn pick(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let u = self.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last_positive = i;
                if u < acc {
                    return i;
                }
            }
        }
        last_positive
    }
}

/// Mixes a label into a base seed (FNV-1a), giving independent named streams.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(&seed.to_le_bytes());
    h.write(label.as_bytes());
    h.finish()
}

/// Platform-stable RNG used throughout the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
