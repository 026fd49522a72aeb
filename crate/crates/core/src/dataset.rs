//! Offline reward collection.
//!
//! For every query the target and each drafter produce a greedy rollout. A
//! drafter's alignment is the ROUGE-L of its rollout against the target's; the
//! autoregressive arm scores a temperature-1 target sample against the same
//! greedy reference. Rewards mix alignment with a fixed size cost.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::corpus::LabeledQuery;
use crate::dist::{derive_seed, seeded_rng};
use crate::error::{invalid, parse_err, Error, Result};
use crate::ngram::NGramModel;
use crate::scoring::{compose_reward, rouge_l, size_costs};

/// Tolerance on `reward = alpha·alignment + (1-alpha)·cost` when loading.
const REWARD_IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum ArmKind {
    Drafter(Arc<NGramModel>),
    Autoregressive,
}

/// One routing option.
#[derive(Debug, Clone)]
pub struct ArmSpec {
    pub arm_id: String,
    pub kind: ArmKind,
    pub param_count: f64,
}

pub const AUTOREGRESSIVE_ARM_ID: &str = "autoregressive";

impl ArmSpec {
    pub fn drafter(model: Arc<NGramModel>) -> Self {
        Self {
            arm_id: model.model_id().to_string(),
            param_count: model.param_count(),
            kind: ArmKind::Drafter(model),
        }
    }

    /// Decoding with the target alone; sized as the target.
    pub fn autoregressive(target: &NGramModel) -> Self {
        Self {
            arm_id: AUTOREGRESSIVE_ARM_ID.to_string(),
            kind: ArmKind::Autoregressive,
            param_count: target.param_count(),
        }
    }

    pub fn is_autoregressive(&self) -> bool {
        matches!(self.kind, ArmKind::Autoregressive)
    }
}

/// Checks arm ids are unique and at most one arm is autoregressive.
pub fn validate_arms(arms: &[ArmSpec]) -> Result<()> {
    if arms.is_empty() {
        return Err(invalid("need at least one arm"));
    }
    if arms.iter().filter(|a| a.is_autoregressive()).count() > 1 {
        return Err(invalid("at most one arm may be autoregressive"));
    }
    let mut ids = HashSet::new();
    for a in arms {
        if !ids.insert(a.arm_id.as_str()) {
            return Err(invalid(format!("duplicate arm id {:?}", a.arm_id)));
        }
        if a.arm_id.is_empty() || a.arm_id.contains(['\t', '\n']) {
            return Err(invalid(format!("bad arm id {:?}", a.arm_id)));
        }
    }
    Ok(())
}

/// One logged (query, arm, reward) tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardRecord {
    pub query_id: String,
    pub query_text: String,
    pub arm_id: String,
    pub arm_index: usize,
    pub alignment: f64,
    pub cost: f64,
    pub alpha: f64,
    pub reward: f64,
    /// Analysis-only annotations such as `true_domain`; never read by the policy.
    pub meta: BTreeMap<String, String>,
}

impl RewardRecord {
    /// Recomputes the reward for a different `alpha`.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Ok(Self {
            alpha,
            reward: compose_reward(self.alignment, self.cost, alpha)?,
            ..self.clone()
        })
    }
}

/// Records plus the number of arms they index into.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RewardSet {
    pub k: usize,
    pub records: Vec<RewardRecord>,
}

impl RewardSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Every record with `alpha` replaced and its reward recomposed.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Ok(Self {
            k: self.k,
            records: self
                .records
                .iter()
                .map(|r| r.with_alpha(alpha))
                .collect::<Result<_>>()?,
        })
    }

    /// Mean alignment per arm index.
    pub fn mean_alignment(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.k];
        let mut n = vec![0usize; self.k];
        for r in &self.records {
            sum[r.arm_index] += r.alignment;
            n[r.arm_index] += 1;
        }
        sum.iter()
            .zip(&n)
            .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect()
    }

    /// The first `n` records.
    pub fn prefix(&self, n: usize) -> Self {
        Self {
            k: self.k,
            records: self.records[..n.min(self.records.len())].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutConfig {
    pub max_len: usize,
    pub seed: u64,
}

/// Builds `k` reward records per query.
///
/// Costs come from [`size_costs`] over all arm sizes plus the target's. The
/// autoregressive arm's sample uses an RNG derived from `(seed, query_id)`, so
/// the result does not depend on query order.
pub fn collect(
    queries: &[LabeledQuery],
    target: &NGramModel,
    arms: &[ArmSpec],
    alpha: f64,
    rollout: &RolloutConfig,
) -> Result<RewardSet> {
    validate_arms(arms)?;
    if queries.is_empty() {
        return Err(invalid("need at least one query"));
    }
    compose_reward(0.0, 0.0, alpha)?;
    let mut seen = HashSet::new();
    for q in queries {
        if !seen.insert(q.query_id.as_str()) {
            return Err(Error::DuplicateQuery(q.query_id.clone()));
        }
    }
    for a in arms {
        if let ArmKind::Drafter(m) = &a.kind {
            if m.vocab() != target.vocab() {
                return Err(Error::VocabularyMismatch(format!(
                    "drafter {} does not share the target vocabulary",
                    a.arm_id
                )));
            }
        }
    }

    let mut sizes: Vec<f64> = arms.iter().map(|a| a.param_count).collect();
    sizes.push(target.param_count());
    let costs = size_costs(&sizes)?;
    let vocab = target.vocab();
    let eos = vocab.eos();

    let mut records = Vec::with_capacity(queries.len() * arms.len());
    for q in queries {
        let prompt = vocab.encode(&q.text)?;
        let reference = target.greedy(&prompt, rollout.max_len)?;
        for (j, arm) in arms.iter().enumerate() {
            let output = match &arm.kind {
                ArmKind::Drafter(model) => model.greedy(&prompt, rollout.max_len)?,
                ArmKind::Autoregressive => {
                    let mut rng = seeded_rng(derive_seed(rollout.seed, &format!("ar-sample/{}", q.query_id)));
                    target.generate(&prompt, rollout.max_len, 1.0, &mut rng)?
                }
            };
            let alignment = rouge_l(output.content(eos), reference.content(eos));
            let mut meta = BTreeMap::new();
            meta.insert("true_domain".to_string(), q.true_domain.clone());
            records.push(RewardRecord {
                query_id: q.query_id.clone(),
                query_text: q.text.clone(),
                arm_id: arm.arm_id.clone(),
                arm_index: j,
                alignment,
                cost: costs[j],
                alpha,
                reward: compose_reward(alignment, costs[j], alpha)?,
                meta,
            });
        }
    }
    Ok(RewardSet {
        k: arms.len(),
        records,
    })
}

/// Writes `rewardset v1 k=<arms>` and one tab-separated line per record:
/// query_id, arm_index, arm_id, alignment, cost, alpha, reward, query_text, meta.
pub fn save<W: Write>(set: &RewardSet, mut w: W) -> Result<()> {
    writeln!(w, "rewardset v1 k={}", set.k)?;
    for r in &set.records {
        for field in [&r.query_id, &r.arm_id, &r.query_text] {
            if field.contains(['\t', '\n', '\r']) {
                return Err(invalid(format!("record field {field:?} contains a tab or newline")));
            }
        }
        let meta = serde_json::to_string(&r.meta).map_err(|e| invalid(e.to_string()))?;
        // f64 Display is the shortest string that parses back to the same bits
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.query_id, r.arm_index, r.arm_id, r.alignment, r.cost, r.alpha, r.reward, r.query_text, meta
        )?;
    }
    Ok(())
}

pub fn load<R: BufRead>(r: R) -> Result<RewardSet> {
    let mut lines = r.lines();
    let header = match lines.next() {
        None => return Ok(RewardSet::default()),
        Some(h) => h?,
    };
    let k: usize = header
        .strip_prefix("rewardset v1 k=")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(1, format!("bad header {header:?}")))?;
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 9 {
            return Err(parse_err(lineno, format!("expected 9 fields, found {}", f.len())));
        }
        let real = |idx: usize, name: &str| -> Result<f64> {
            let x: f64 = f[idx]
                .parse()
                .map_err(|e| parse_err(lineno, format!("{name}: {e}")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(parse_err(lineno, format!("{name} is not finite")))
            }
        };
        let arm_index: usize = f[1]
            .parse()
            .map_err(|e| parse_err(lineno, format!("arm_index: {e}")))?;
        if arm_index >= k {
            return Err(parse_err(lineno, format!("arm_index {arm_index} >= k={k}")));
        }
        let alignment = real(3, "alignment")?;
        let cost = real(4, "cost")?;
        let alpha = real(5, "alpha")?;
        let reward = real(6, "reward")?;
        let expected = compose_reward(alignment, cost, alpha).map_err(|e| parse_err(lineno, e.to_string()))?;
        if (expected - reward).abs() > REWARD_IDENTITY_TOL {
            return Err(parse_err(lineno, format!("reward {reward} != {expected} from its components")));
        }
        let meta: BTreeMap<String, String> =
            serde_json::from_str(f[8]).map_err(|e| parse_err(lineno, format!("meta: {e}")))?;
        records.push(RewardRecord {
            query_id: f[0].to_string(),
            arm_index,
            arm_id: f[2].to_string(),
            alignment,
            cost,
            alpha,
            reward,
            query_text: f[7].to_string(),
            meta,
        });
    }
    Ok(RewardSet { k, records })
}
