//! Speculative decoding.
//!
//! Each round the drafter proposes up to `gamma` tokens and the target checks
//! them in one (modelled as parallel) pass:
//!
//! 1. draft token `x` drawn from `p` is kept with probability `min(1, q(x)/p(x))`;
//! 2. on the first rejection one token is drawn from `norm(max(0, q - p))` and the
//!    rest of the draft is discarded;
//! 3. if the whole draft survives, a bonus token is drawn from `q` at the next
//!    position.
//!
//! Both `p` and `q` are temperature-adjusted first, so emitted tokens follow the
//! temperature-adjusted target exactly.

use std::time::Instant;

use crate::dist::{apply_temperature, DrawSource, TokenDistribution};
use crate::error::{invalid, Error, Result};
use crate::ngram::{GenerationOutput, NGramModel};
use crate::vocab::TokenId;

/// Residual mass below this is treated as empty and the target is sampled directly.
const RESIDUAL_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeConfig {
    /// Draft tokens per round.
    pub gamma: usize,
    pub temperature: f64,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            gamma: 7,
            temperature: 1.0,
            max_len: 32,
            seed: 0,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma < 1 {
            return Err(invalid("gamma must be >= 1"));
        }
        if self.max_len < 1 {
            return Err(invalid("max_len must be >= 1"));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(invalid(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        Ok(())
    }
}

/// Exact accounting for one decode run. Wall times are in nanoseconds.
///
/// `wall_ns_total` is the reported time: decode time plus policy inference.
/// Featurization is measured separately and not part of the total.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeStats {
    pub target_calls: u64,
    pub draft_calls: u64,
    pub tokens_emitted: u64,
    pub draft_tokens_generated: u64,
    pub draft_tokens_accepted: u64,
    pub wall_ns_total: u64,
    pub wall_ns_decode: u64,
    pub wall_ns_policy: u64,
    pub wall_ns_featurize: u64,
}

impl DecodeStats {
    /// Accepted over generated draft tokens.
    pub fn accept_rate(&self) -> Result<f64> {
        accept_rate(self)
    }

    /// Same counters with timing zeroed, for reproducibility checks.
    pub fn counts_only(&self) -> DecodeStats {
        DecodeStats {
            wall_ns_total: 0,
            wall_ns_decode: 0,
            wall_ns_policy: 0,
            wall_ns_featurize: 0,
            ..*self
        }
    }

    fn finish(&mut self, started: Instant) {
        let ns = started.elapsed().as_nanos() as u64;
        self.wall_ns_decode = ns;
        self.wall_ns_total = ns + self.wall_ns_policy;
    }
}

/// `draft_tokens_accepted / draft_tokens_generated`. The bonus token and residual
/// draws are target samples and count in neither.
pub fn accept_rate(stats: &DecodeStats) -> Result<f64> {
    if stats.draft_tokens_generated == 0 {
        return Err(Error::NoDraftTokens);
    }
    Ok(stats.draft_tokens_accepted as f64 / stats.draft_tokens_generated as f64)
}

fn check_pair(target: &NGramModel, draft: &NGramModel) -> Result<()> {
    if target.vocab() != draft.vocab() {
        return Err(Error::VocabularyMismatch(format!(
            "target {} and draft {} use different vocabularies",
            target.model_id(),
            draft.model_id()
        )));
    }
    Ok(())
}

/// `norm(max(0, q - p))`, or `q` when the residual is numerically empty.
pub fn residual_distribution(q: &TokenDistribution, p: &TokenDistribution) -> Vec<f64> {
    let residual: Vec<f64> = q
        .probs()
        .iter()
        .zip(p.probs())
        .map(|(a, b)| (a - b).max(0.0))
        .collect();
    let mass: f64 = residual.iter().sum();
    if mass < RESIDUAL_FLOOR {
        q.probs().to_vec()
    } else {
        residual.into_iter().map(|r| r / mass).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accepted,
    /// Rejected; the token drawn from the residual distribution.
    Replaced(TokenId),
}

/// Accept-reject step for one draft token `x ~ p` against target `q`.
pub fn verify_draft_token<D: DrawSource + ?Sized>(
    p: &TokenDistribution,
    q: &TokenDistribution,
    x: TokenId,
    draws: &mut D,
) -> Verdict {
    if draws.bernoulli(q.prob(x) / p.prob(x)) {
        Verdict::Accepted
    } else {
        Verdict::Replaced(draws.pick(&residual_distribution(q, p)) as TokenId)
    }
}

/// Lossless speculative sampling of up to `cfg.max_len` tokens after `prompt`.
pub fn speculative_decode<D: DrawSource + ?Sized>(
    target: &NGramModel,
    draft: &NGramModel,
    prompt: &[TokenId],
    cfg: &DecodeConfig,
    draws: &mut D,
) -> Result<(GenerationOutput, DecodeStats)> {
    cfg.validate()?;
    check_pair(target, draft)?;
    let started = Instant::now();
    let eos = target.vocab().eos();
    let temp = cfg.temperature;
    let mut stats = DecodeStats::default();
    let mut context = prompt.to_vec();
    let start = context.len();

    'rounds: while context.len() - start < cfg.max_len {
        let room = cfg.max_len - (context.len() - start);
        let round_base = context.len();

        let mut draft_dists = Vec::with_capacity(cfg.gamma);
        for _ in 0..cfg.gamma.min(room) {
            let p = apply_temperature(&draft.next_distribution(&context), temp)?;
            let x = draws.pick(p.probs()) as TokenId;
            stats.draft_calls += 1;
            draft_dists.push(p);
            context.push(x);
            if x == eos {
                break;
            }
        }
        let drafted: Vec<TokenId> = context.split_off(round_base);
        stats.draft_tokens_generated += drafted.len() as u64;
        stats.target_calls += 1;

        for (x, p) in drafted.iter().copied().zip(&draft_dists) {
            let q = apply_temperature(&target.next_distribution(&context), temp)?;
            match verify_draft_token(p, &q, x, draws) {
                Verdict::Accepted => {
                    stats.draft_tokens_accepted += 1;
                    context.push(x);
                    if x == eos {
                        break 'rounds;
                    }
                }
                Verdict::Replaced(y) => {
                    context.push(y);
                    if y == eos {
                        break 'rounds;
                    }
                    continue 'rounds;
                }
            }
        }

        if context.len() - start < cfg.max_len {
            let q = apply_temperature(&target.next_distribution(&context), temp)?;
            let bonus = draws.pick(q.probs()) as TokenId;
            context.push(bonus);
            if bonus == eos {
                break;
            }
        }
    }

    let tokens = context.split_off(start);
    stats.tokens_emitted = tokens.len() as u64;
    stats.finish(started);
    Ok((GenerationOutput::new(tokens, target.vocab()), stats))
}

/// Assisted decoding with exact-match verification: a draft token survives iff it
/// equals the target's argmax. The output is always the target's greedy output.
///
/// `cfg.temperature` must be 0.
pub fn greedy_assisted_decode(
    target: &NGramModel,
    draft: &NGramModel,
    prompt: &[TokenId],
    cfg: &DecodeConfig,
) -> Result<(GenerationOutput, DecodeStats)> {
    cfg.validate()?;
    if cfg.temperature != 0.0 {
        return Err(invalid("greedy assisted decoding requires temperature 0"));
    }
    check_pair(target, draft)?;
    let started = Instant::now();
    let eos = target.vocab().eos();
    let mut stats = DecodeStats::default();
    let mut context = prompt.to_vec();
    let start = context.len();

    'rounds: while context.len() - start < cfg.max_len {
        let room = cfg.max_len - (context.len() - start);
        let round_base = context.len();
        for _ in 0..cfg.gamma.min(room) {
            let x = draft.next_distribution(&context).argmax();
            stats.draft_calls += 1;
            context.push(x);
            if x == eos {
                break;
            }
        }
        let drafted = context.split_off(round_base);
        stats.draft_tokens_generated += drafted.len() as u64;
        stats.target_calls += 1;

        for x in drafted {
            let best = target.next_distribution(&context).argmax();
            context.push(best);
            if best != x {
                if best == eos {
                    break 'rounds;
                }
                continue 'rounds;
            }
            stats.draft_tokens_accepted += 1;
            if x == eos {
                break 'rounds;
            }
        }

        if context.len() - start < cfg.max_len {
            let bonus = target.next_distribution(&context).argmax();
            context.push(bonus);
            if bonus == eos {
                break;
            }
        }
    }

    let tokens = context.split_off(start);
    stats.tokens_emitted = tokens.len() as u64;
    stats.finish(started);
    Ok((GenerationOutput::new(tokens, target.vocab()), stats))
}

/// Target-only generation with the same accounting: one target call per token.
pub fn autoregressive_decode<D: DrawSource + ?Sized>(
    target: &NGramModel,
    prompt: &[TokenId],
    cfg: &DecodeConfig,
    draws: &mut D,
) -> Result<(GenerationOutput, DecodeStats)> {
    cfg.validate()?;
    let started = Instant::now();
    let out = target.generate(prompt, cfg.max_len, cfg.temperature, draws)?;
    let mut stats = DecodeStats {
        target_calls: out.tokens.len() as u64,
        tokens_emitted: out.tokens.len() as u64,
        ..DecodeStats::default()
    };
    stats.finish(started);
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dist::seeded_rng;
    use crate::ngram::fit_ngram;
    use crate::vocab::Vocabulary;

    fn models() -> (NGramModel, NGramModel, Arc<Vocabulary>) {
        let v = Arc::new(Vocabulary::from_characters("abcd").unwrap());
        let t: Vec<_> = ["abcdabcdab", "abcabcabca", "dcbadcba"]
            .iter()
            .map(|s| v.encode(s).unwrap())
            .collect();
        let d: Vec<_> = ["aaaabbbb", "abab"].iter().map(|s| v.encode(s).unwrap()).collect();
        (
            fit_ngram(v.clone(), &t, 3, 0.1, 2.0, "target").unwrap(),
            fit_ngram(v.clone(), &d, 2, 0.1, 1.0, "draft").unwrap(),
            v,
        )
    }

    #[test]
    fn accept_rate_definition() {
        let s = DecodeStats {
            draft_tokens_generated: 7,
            draft_tokens_accepted: 3,
            ..Default::default()
        };
        assert!((accept_rate(&s).unwrap() - 3.0 / 7.0).abs() < 1e-15);
        let two_rounds = DecodeStats {
            draft_tokens_generated: 10,
            draft_tokens_accepted: 7,
            ..Default::default()
        };
        assert_eq!(accept_rate(&two_rounds).unwrap(), 0.7);
        let full = DecodeStats {
            draft_tokens_generated: 14,
            draft_tokens_accepted: 14,
            ..Default::default()
        };
        assert_eq!(accept_rate(&full).unwrap(), 1.0);
        assert!(matches!(
            accept_rate(&DecodeStats::default()),
            Err(Error::NoDraftTokens)
        ));
    }

    #[test]
    fn residual_by_hand() {
        let p = TokenDistribution::new(vec![0.5, 0.5]).unwrap();
        let q = TokenDistribution::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(residual_distribution(&q, &p), vec![0.0, 1.0]);
        // identical distributions fall back to q
        assert_eq!(residual_distribution(&q, &q), q.probs().to_vec());
    }

    #[test]
    fn single_step_by_hand() {
        let p = TokenDistribution::new(vec![0.5, 0.5]).unwrap();
        let q = TokenDistribution::new(vec![0.25, 0.75]).unwrap();
        let law = crate::exact::enumerate_law(
            |d| match verify_draft_token(&p, &q, 0, d) {
                Verdict::Accepted => (true, 0),
                Verdict::Replaced(y) => (false, y),
            },
            10,
        );
        assert_eq!(law.len(), 2);
        assert!((law[&(true, 0)] - 0.5).abs() < 1e-15);
        assert!((law[&(false, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn identical_models_accept_everything() {
        let (t, _, v) = models();
        let cfg = DecodeConfig {
            gamma: 4,
            temperature: 1.0,
            max_len: 30,
            seed: 0,
        };
        let prompt = v.encode("ab").unwrap();
        let (_, s) = speculative_decode(&t, &t, &prompt, &cfg, &mut seeded_rng(2)).unwrap();
        assert_eq!(s.draft_tokens_accepted, s.draft_tokens_generated);
        let g = DecodeConfig { temperature: 0.0, ..cfg };
        let (_, s) = greedy_assisted_decode(&t, &t, &prompt, &g).unwrap();
        assert_eq!(accept_rate(&s).unwrap(), 1.0);
    }

    #[test]
    fn greedy_assisted_matches_target_greedy() {
        let (t, d, v) = models();
        for prompt in ["", "a", "dc", "abca"] {
            let prompt = v.encode(prompt).unwrap();
            for gamma in 1..6 {
                let cfg = DecodeConfig {
                    gamma,
                    temperature: 0.0,
                    max_len: 17,
                    seed: 0,
                };
                let (out, _) = greedy_assisted_decode(&t, &d, &prompt, &cfg).unwrap();
                assert_eq!(out, t.greedy(&prompt, 17).unwrap());
            }
        }
    }

    #[test]
    fn call_bounds_and_determinism() {
        let (t, d, v) = models();
        let prompt = v.encode("b").unwrap();
        for gamma in [1, 3, 7] {
            let cfg = DecodeConfig {
                gamma,
                temperature: 0.9,
                max_len: 25,
                seed: 0,
            };
            let (o1, s1) = speculative_decode(&t, &d, &prompt, &cfg, &mut seeded_rng(5)).unwrap();
            let (o2, s2) = speculative_decode(&t, &d, &prompt, &cfg, &mut seeded_rng(5)).unwrap();
            assert_eq!(o1, o2);
            assert_eq!(s1.counts_only(), s2.counts_only());
            let l = s1.tokens_emitted;
            assert!(s1.target_calls <= l);
            assert!(s1.target_calls >= l.div_ceil(gamma as u64 + 1));
            assert!(s1.draft_tokens_accepted <= s1.draft_tokens_generated);
            assert_eq!(s1.wall_ns_total, s1.wall_ns_decode);
        }
    }

    #[test]
    fn vocabulary_mismatch() {
        let (t, _, _) = models();
        let other = Arc::new(Vocabulary::from_characters("abcde").unwrap());
        let d = fit_ngram(other, &[vec![2, 3]], 2, 0.1, 1.0, "d").unwrap();
        let cfg = DecodeConfig::default();
        assert!(matches!(
            speculative_decode(&t, &d, &[], &cfg, &mut seeded_rng(0)),
            Err(Error::VocabularyMismatch(_))
        ));
        let g = DecodeConfig { temperature: 0.0, ..cfg };
        assert!(greedy_assisted_decode(&t, &d, &[], &g).is_err());
        assert!(greedy_assisted_decode(&t, &t, &[], &cfg).is_err());
    }

    #[test]
    fn bad_config() {
        let (t, d, _) = models();
        for cfg in [
            DecodeConfig { gamma: 0, ..Default::default() },
            DecodeConfig { max_len: 0, ..Default::default() },
            DecodeConfig { temperature: -1.0, ..Default::default() },
        ] {
            assert!(speculative_decode(&t, &d, &[], &cfg, &mut seeded_rng(0)).is_err());
        }
    }

    #[test]
    fn autoregressive_counts_one_call_per_token() {
        let (t, _, v) = models();
        let cfg = DecodeConfig::default();
        let (out, s) = autoregressive_decode(&t, &v.encode("a").unwrap(), &cfg, &mut seeded_rng(1)).unwrap();
        assert_eq!(s.target_calls, out.tokens.len() as u64);
        assert_eq!(s.draft_tokens_generated, 0);
        assert!(s.accept_rate().is_err());
    }
}
