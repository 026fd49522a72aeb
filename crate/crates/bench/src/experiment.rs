//! The synth → fit → collect → train → evaluate pipeline for one seed.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use specroute_core::corpus::{make_corpus, make_query_set, validate_domains, DomainSpec, LabeledQuery, Split};
use specroute_core::dataset::{collect, ArmKind, ArmSpec, RewardSet, RolloutConfig};
use specroute_core::dist::{derive_seed, seeded_rng};
use specroute_core::ngram::{fit_ngram, NGramModel};
use specroute_core::policy::{train, HashedNgramFeaturizer, PolicyParams, TrainedPolicy};
use specroute_core::router::{decode_with_arm, Router, SelectionMode};
use specroute_core::scoring::rouge_l;
use specroute_core::specdec::{autoregressive_decode, DecodeConfig, DecodeStats};
use specroute_core::{TokenId, Vocabulary};

use crate::config::ExperimentConfig;
use crate::error::{BenchError, BenchResult};

/// Synthetic data for one seed.
#[derive(Debug, Clone)]
pub struct SynthData {
    pub domains: Vec<DomainSpec>,
    /// Training corpus per domain id.
    pub corpora: BTreeMap<String, Vec<Vec<TokenId>>>,
    pub train: Vec<LabeledQuery>,
    pub test: Vec<LabeledQuery>,
}

pub fn synthesize(cfg: &ExperimentConfig, vocab: &Vocabulary, seed: u64) -> BenchResult<SynthData> {
    let domains = cfg
        .domains
        .iter()
        .map(|d| DomainSpec::preset(d))
        .collect::<Result<Vec<_>, _>>()?;
    validate_domains(&domains, vocab).map_err(|e| BenchError::Config(e.to_string()))?;
    let corpus_seed = derive_seed(seed, "corpus");
    let corpora = domains
        .iter()
        .map(|d| {
            make_corpus(d, vocab, cfg.corpus_sequences, cfg.corpus_seq_len, corpus_seed)
                .map(|c| (d.domain_id.clone(), c))
        })
        .collect::<Result<_, _>>()?;
    let query_seed = derive_seed(seed, "queries");
    let k = domains.len();
    let train = make_query_set(&domains, vocab, cfg.n_train_queries / k, Split::Train, query_seed)?;
    let test = make_query_set(&domains, vocab, cfg.n_test_queries / k, Split::Test, query_seed)?;
    Ok(SynthData {
        domains,
        corpora,
        train,
        test,
    })
}

/// The target (fit on every domain) and the drafters, in config order.
pub fn fit_models(
    cfg: &ExperimentConfig,
    vocab: &Arc<Vocabulary>,
    corpora: &BTreeMap<String, Vec<Vec<TokenId>>>,
) -> BenchResult<(NGramModel, Vec<NGramModel>)> {
    let union: Vec<Vec<TokenId>> = cfg.domains.iter().flat_map(|d| corpora[d].iter().cloned()).collect();
    let target = fit_ngram(
        vocab.clone(),
        &union,
        cfg.target_order,
        cfg.smoothing,
        cfg.target_params,
        &format!("target-n{}", cfg.target_order),
    )?;
    let drafters = cfg
        .drafter_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| {
            fit_ngram(
                vocab.clone(),
                &corpora[&cfg.drafter_corpora[i]],
                cfg.drafter_orders[i],
                cfg.smoothing,
                cfg.drafter_params[i],
                id,
            )
        })
        .collect::<Result<_, _>>()?;
    Ok((target, drafters))
}

pub fn build_arms(cfg: &ExperimentConfig, target: &NGramModel, drafters: Vec<NGramModel>) -> Vec<ArmSpec> {
    let mut arms: Vec<ArmSpec> = drafters.into_iter().map(|d| ArmSpec::drafter(Arc::new(d))).collect();
    if cfg.autoregressive_arm {
        arms.push(ArmSpec::autoregressive(target));
    }
    arms
}

/// Everything needed to collect, train and evaluate for one seed.
#[derive(Debug, Clone)]
pub struct Setup {
    pub seed: u64,
    pub vocab: Arc<Vocabulary>,
    pub data: SynthData,
    pub target: NGramModel,
    pub arms: Vec<ArmSpec>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> BenchResult<Self> {
        cfg.validate()?;
        let vocab = Arc::new(Vocabulary::stock());
        let data = synthesize(cfg, &vocab, seed)?;
        let (target, drafters) = fit_models(cfg, &vocab, &data.corpora)?;
        let arms = build_arms(cfg, &target, drafters);
        Ok(Self {
            seed,
            vocab,
            data,
            target,
            arms,
        })
    }

    pub fn arm_ids(&self) -> Vec<String> {
        self.arms.iter().map(|a| a.arm_id.clone()).collect()
    }

    pub fn collect(&self, cfg: &ExperimentConfig, alpha: f64) -> BenchResult<RewardSet> {
        let rollout = RolloutConfig {
            max_len: cfg.max_len,
            seed: derive_seed(self.seed, "rollout"),
        };
        Ok(collect(&self.data.train, &self.target, &self.arms, alpha, &rollout)?)
    }

    pub fn featurizer(&self, cfg: &ExperimentConfig) -> HashedNgramFeaturizer {
        HashedNgramFeaturizer::new(cfg.feature_dim)
    }

    pub fn train(&self, cfg: &ExperimentConfig, dataset: &RewardSet) -> BenchResult<TrainedPolicy> {
        train_policy(cfg, dataset, self.seed)
    }
}

/// Trains the policy for experiment seed `seed`.
pub fn train_policy(cfg: &ExperimentConfig, dataset: &RewardSet, seed: u64) -> BenchResult<TrainedPolicy> {
    Ok(train(
        dataset,
        &HashedNgramFeaturizer::new(cfg.feature_dim),
        cfg.hidden,
        &cfg.train_config(derive_seed(seed, "policy")),
    )?)
}

/// How a test query is decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    /// Target alone, no drafter.
    Autoregressive,
    /// Always the drafter arm at this index.
    Fixed(usize),
    /// Arm chosen per query by the policy.
    Policy(SelectionMode),
}

impl Strategy {
    /// Autoregressive baseline, every drafter arm, then both policy modes.
    pub fn standard(arms: &[ArmSpec], with_policy: bool) -> Vec<Strategy> {
        let mut out = vec![Strategy::Autoregressive];
        out.extend(
            arms.iter()
                .enumerate()
                .filter(|(_, a)| !a.is_autoregressive())
                .map(|(i, _)| Strategy::Fixed(i)),
        );
        if with_policy {
            out.extend([Strategy::Policy(SelectionMode::Greedy), Strategy::Policy(SelectionMode::Dynamic)]);
        }
        out
    }

    pub fn label(&self, arms: &[ArmSpec]) -> String {
        match self {
            Strategy::Autoregressive => "autoregressive".into(),
            Strategy::Fixed(i) => format!("fixed:{}", arms[*i].arm_id),
            Strategy::Policy(mode) => format!("policy-{mode}"),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Autoregressive => f.write_str("autoregressive"),
            Strategy::Fixed(i) => write!(f, "fixed:{i}"),
            Strategy::Policy(mode) => write!(f, "policy-{mode}"),
        }
    }
}

/// One decoded test query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub seed: u64,
    pub task: String,
    pub strategy: String,
    pub query_id: String,
    /// Draft tokens per round in this decode.
    pub gamma: usize,
    /// Arm used; `autoregressive` for the baseline.
    pub arm_id: String,
    pub output_text: String,
    pub stats: DecodeStats,
    /// ROUGE-L of the output against the target's greedy output.
    pub quality: f64,
}

/// Per-query decode seed, shared by every strategy so a routed query replays
/// exactly the fixed-arm decode of the arm it picked.
pub fn decode_seed(seed: u64, query_id: &str) -> u64 {
    derive_seed(seed, &format!("decode/{query_id}"))
}

/// Decodes every test query under each strategy.
pub fn evaluate(
    setup: &Setup,
    cfg: &ExperimentConfig,
    decode: &DecodeConfig,
    policy: Option<&PolicyParams>,
    strategies: &[Strategy],
) -> BenchResult<Vec<QueryOutcome>> {
    let router = match policy {
        Some(p) => Some(Router::new(p, setup.featurizer(cfg), &setup.arms, &setup.target)?),
        None => None,
    };
    let eos = setup.vocab.eos();
    let mut out = Vec::with_capacity(setup.data.test.len() * strategies.len());
    for q in &setup.data.test {
        let prompt = setup.vocab.encode(&q.text)?;
        let reference = setup.target.greedy(&prompt, decode.max_len)?;
        let qcfg = DecodeConfig {
            seed: decode_seed(setup.seed, &q.query_id),
            ..*decode
        };
        for &strategy in strategies {
            let (arm_id, output, stats) = match strategy {
                Strategy::Autoregressive => {
                    let mut rng = seeded_rng(qcfg.seed);
                    let (o, s) = autoregressive_decode(&setup.target, &prompt, &qcfg, &mut rng)?;
                    ("autoregressive".to_string(), o, s)
                }
                Strategy::Fixed(i) => {
                    let arm = &setup.arms[i];
                    if matches!(arm.kind, ArmKind::Autoregressive) {
                        return Err(BenchError::Config("fixed strategy on the autoregressive arm".into()));
                    }
                    let (o, s) = decode_with_arm(arm, &setup.target, &prompt, &qcfg)?;
                    (arm.arm_id.clone(), o, s)
                }
                Strategy::Policy(mode) => {
                    let router = router
                        .as_ref()
                        .ok_or_else(|| BenchError::Config("policy strategy needs a trained policy".into()))?;
                    let mut rng = seeded_rng(derive_seed(setup.seed, &format!("select/{}", q.query_id)));
                    let r = router.route_and_decode(&q.text, &qcfg, mode, &mut rng)?;
                    (r.arm_id, r.output, r.stats)
                }
            };
            out.push(QueryOutcome {
                seed: setup.seed,
                task: q.true_domain.clone(),
                strategy: strategy.label(&setup.arms),
                query_id: q.query_id.clone(),
                gamma: decode.gamma,
                arm_id,
                quality: rouge_l(output.content(eos), reference.content(eos)),
                output_text: output.text,
                stats,
            });
        }
    }
    Ok(out)
}
