//! Experiment configuration.
//!
//! A config file is flat TOML. The optional `recipe` key picks a stock recipe
//! and every other key overrides one of its fields:
//!
//! ```toml
//! recipe = "two-domain"
//! seeds = [0, 1, 2]
//! n_train_queries = 1000
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use specroute_core::corpus::DomainSpec;
use specroute_core::policy::{OptimizerKind, TrainConfig};
use specroute_core::specdec::DecodeConfig;

use crate::error::{BenchError, BenchResult};

pub const RECIPES: [&str; 5] = ["two-domain", "size-tradeoff", "with-ar-arm", "curve", "sweeps"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub recipe: String,
    /// Stock domain presets used for corpora and queries.
    pub domains: Vec<String>,
    /// Domain whose corpus trains each drafter; parallel to the next two keys.
    pub drafter_corpora: Vec<String>,
    pub drafter_orders: Vec<usize>,
    /// Declared drafter sizes in normalized units.
    pub drafter_params: Vec<f64>,
    /// Adds an arm that decodes with the target alone.
    pub autoregressive_arm: bool,
    pub target_order: usize,
    pub target_params: f64,
    pub smoothing: f64,
    /// Training sequences per domain.
    pub corpus_sequences: usize,
    pub corpus_seq_len: usize,
    pub alpha: f64,
    pub gamma: usize,
    pub temperature: f64,
    pub max_len: usize,
    pub feature_dim: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Total queries over all domains; must divide evenly.
    pub n_train_queries: usize,
    pub n_test_queries: usize,
    pub seeds: Vec<u64>,
    /// Grid for `sweep-alpha`.
    pub alphas: Vec<f64>,
    /// Dataset prefix sizes (records) for `curve`.
    pub curve_sizes: Vec<usize>,
    pub sweep_gammas: Vec<usize>,
    pub sweep_temperatures: Vec<f64>,
}

impl ExperimentConfig {
    /// The stock recipe `name`.
    pub fn recipe(name: &str) -> BenchResult<Self> {
        let base = Self {
            recipe: name.to_string(),
            domains: vec!["periodic".into(), "markov".into()],
            drafter_corpora: vec!["periodic".into(), "markov".into()],
            drafter_orders: vec![3, 3],
            drafter_params: vec![1.0, 1.0],
            autoregressive_arm: false,
            target_order: 4,
            target_params: 2.0,
            smoothing: 0.1,
            corpus_sequences: 400,
            corpus_seq_len: 64,
            alpha: 1.0,
            gamma: 7,
            temperature: 1.0,
            max_len: 32,
            feature_dim: 256,
            hidden: 512,
            epochs: 3,
            batch_size: 64,
            learning_rate: 1e-3,
            weight_decay: 1e-2,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
            n_train_queries: 2000,
            n_test_queries: 500,
            seeds: vec![0, 1, 2],
            alphas: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            curve_sizes: vec![10, 100, 200, 400, 1000, 2000, 4000],
            sweep_gammas: vec![5, 7, 10],
            sweep_temperatures: vec![0.5, 0.9, 1.0],
        };
        let cfg = match name {
            "two-domain" | "curve" | "sweeps" => base,
            "size-tradeoff" => Self {
                domains: vec!["periodic".into()],
                drafter_corpora: vec!["periodic".into(); 3],
                drafter_orders: vec![1, 2, 3],
                drafter_params: vec![1.0, 2.0, 3.0],
                target_params: 4.0,
                n_train_queries: 1500,
                n_test_queries: 300,
                ..base
            },
            "with-ar-arm" => Self {
                domains: vec!["periodic".into(), "markov".into(), "digits".into()],
                autoregressive_arm: true,
                target_params: 1.25,
                alpha: 0.5,
                n_train_queries: 2400,
                n_test_queries: 600,
                ..base
            },
            other => {
                return Err(BenchError::Config(format!(
                    "unknown recipe {other:?} (expected one of {})",
                    RECIPES.join(", ")
                )))
            }
        };
        Ok(cfg)
    }

    /// Parses a config file body on top of its recipe.
    pub fn from_toml_str(text: &str) -> BenchResult<Self> {
        let user: toml::Table = text.parse().map_err(|e| BenchError::Config(format!("{e}")))?;
        let recipe = match user.get("recipe") {
            None => "two-domain".to_string(),
            Some(toml::Value::String(s)) => s.clone(),
            Some(other) => return Err(BenchError::Config(format!("recipe must be a string, found {other}"))),
        };
        let mut merged = toml::Table::try_from(Self::recipe(&recipe)?).map_err(|e| BenchError::Config(e.to_string()))?;
        for (key, value) in user {
            merged.insert(key, value);
        }
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| BenchError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> BenchResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> BenchResult<()> {
        let fail = |m: String| Err(BenchError::Config(m));
        if self.seeds.is_empty() {
            return fail("seeds must be non-empty".into());
        }
        if self.domains.is_empty() {
            return fail("domains must be non-empty".into());
        }
        for d in &self.domains {
            DomainSpec::preset(d).map_err(|e| BenchError::Config(e.to_string()))?;
        }
        let n = self.drafter_corpora.len();
        if n != self.drafter_orders.len() || n != self.drafter_params.len() {
            return fail("drafter_corpora, drafter_orders and drafter_params must have equal length".into());
        }
        if n == 0 && !self.autoregressive_arm {
            return fail("need at least one arm".into());
        }
        for c in &self.drafter_corpora {
            if !self.domains.contains(c) {
                return fail(format!("drafter corpus {c:?} is not one of the domains"));
            }
        }
        let mut ids = self.drafter_ids();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return fail("two drafters share a corpus and order".into());
        }
        if self.drafter_orders.iter().chain([&self.target_order]).any(|&o| o < 1) {
            return fail("n-gram orders must be >= 1".into());
        }
        if self.drafter_params.iter().chain([&self.target_params]).any(|&p| !(p > 0.0 && p.is_finite())) {
            return fail("param counts must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) || self.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return fail("alpha values must lie in [0, 1]".into());
        }
        if self.corpus_sequences < 1 || self.corpus_seq_len < 1 || self.feature_dim < 1 || self.hidden < 1 {
            return fail("sizes must be >= 1".into());
        }
        let k = self.domains.len();
        for (name, n) in [("n_train_queries", self.n_train_queries), ("n_test_queries", self.n_test_queries)] {
            if n == 0 || n % k != 0 {
                return fail(format!("{name}={n} must be a positive multiple of the domain count {k}"));
            }
        }
        if self.curve_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return fail("curve_sizes must be strictly ascending".into());
        }
        self.decode_config(0).validate().map_err(|e| BenchError::Config(e.to_string()))?;
        for &gamma in &self.sweep_gammas {
            for &temperature in &self.sweep_temperatures {
                DecodeConfig { gamma, temperature, ..self.decode_config(0) }
                    .validate()
                    .map_err(|e| BenchError::Config(e.to_string()))?;
            }
        }
        self.train_config(0).validate().map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(())
    }

    /// Drafter arm ids, `<corpus>-n<order>`.
    pub fn drafter_ids(&self) -> Vec<String> {
        self.drafter_corpora
            .iter()
            .zip(&self.drafter_orders)
            .map(|(c, o)| format!("{c}-n{o}"))
            .collect()
    }

    pub fn decode_config(&self, seed: u64) -> DecodeConfig {
        DecodeConfig {
            gamma: self.gamma,
            temperature: self.temperature,
            max_len: self.max_len,
            seed,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            seed,
            optimizer: OptimizerKind::AdamW,
            mean_baseline: false,
        }
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_toml_string())
    }
}
