//! Additively smoothed n-gram language models.
//!
//! A model of order `n` conditions on the previous `n - 1` tokens, left-padded
//! with `<s>`. Probabilities are `(count + δ) / (total + δ·V)`, so every token
//! has positive mass in every context.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::dist::{apply_temperature, DrawSource, TokenDistribution};
use crate::error::{invalid, parse_err, Error, Result};
use crate::vocab::{TokenId, Vocabulary};

pub const DEFAULT_SMOOTHING: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
struct ContextCounts {
    next: Vec<u64>,
    total: u64,
}

impl ContextCounts {
    fn new(v: usize) -> Self {
        Self {
            next: vec![0; v],
            total: 0,
        }
    }

    fn add(&mut self, token: TokenId, count: u64) {
        self.next[token as usize] += count;
        self.total += count;
    }
}

/// Smoothed conditional-count language model. Immutable after fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    vocab: Arc<Vocabulary>,
    order: usize,
    smoothing: f64,
    param_count: f64,
    model_id: String,
    counts: HashMap<Vec<TokenId>, ContextCounts>,
}

/// Tokens produced by a decoder, ending at `</s>` or the length limit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationOutput {
    pub tokens: Vec<TokenId>,
    pub text: String,
}

impl GenerationOutput {
    pub fn new(tokens: Vec<TokenId>, vocab: &Vocabulary) -> Self {
        let text = vocab.decode(&tokens);
        Self { tokens, text }
    }

    /// Tokens without a trailing `</s>`.
    pub fn content(&self, eos: TokenId) -> &[TokenId] {
        match self.tokens.last() {
            Some(&t) if t == eos => &self.tokens[..self.tokens.len() - 1],
            _ => &self.tokens,
        }
    }
}

fn check_model_args(order: usize, smoothing: f64, param_count: f64, model_id: &str) -> Result<()> {
    if order < 1 {
        return Err(invalid("n-gram order must be >= 1"));
    }
    if !(smoothing > 0.0 && smoothing.is_finite()) {
        return Err(invalid(format!("smoothing must be > 0, got {smoothing}")));
    }
    if !(param_count > 0.0 && param_count.is_finite()) {
        return Err(invalid(format!("param_count must be > 0, got {param_count}")));
    }
    if model_id.is_empty() || model_id.chars().any(char::is_whitespace) {
        return Err(invalid(format!("model id {model_id:?} must be non-empty without whitespace")));
    }
    Ok(())
}

/// Counts every length-`order` window of each sequence after padding it with
/// `order - 1` leading `<s>` tokens.
pub fn fit_ngram(
    vocab: Arc<Vocabulary>,
    corpus: &[Vec<TokenId>],
    order: usize,
    smoothing: f64,
    param_count: f64,
    model_id: &str,
) -> Result<NGramModel> {
    check_model_args(order, smoothing, param_count, model_id)?;
    if corpus.is_empty() {
        return Err(invalid("cannot fit an n-gram model on an empty corpus"));
    }
    let v = vocab.len();
    let mut counts: HashMap<Vec<TokenId>, ContextCounts> = HashMap::new();
    let mut padded = Vec::new();
    for seq in corpus {
        if let Some(&bad) = seq.iter().find(|&&t| !vocab.contains_id(t)) {
            return Err(invalid(format!("token id {bad} outside vocabulary of size {v}")));
        }
        padded.clear();
        padded.resize(order - 1, vocab.bos());
        padded.extend_from_slice(seq);
        for window in padded.windows(order) {
            let (ctx, next) = window.split_at(order - 1);
            counts
                .entry(ctx.to_vec())
                .or_insert_with(|| ContextCounts::new(v))
                .add(next[0], 1);
        }
    }
    Ok(NGramModel {
        vocab,
        order,
        smoothing,
        param_count,
        model_id: model_id.to_string(),
        counts,
    })
}

impl NGramModel {
    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn param_count(&self) -> f64 {
        self.param_count
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Raw count of `next` after the exact `(order - 1)`-token context.
    pub fn count(&self, context: &[TokenId], next: TokenId) -> u64 {
        self.counts
            .get(context)
            .map_or(0, |c| c.next[next as usize])
    }

    pub fn num_contexts(&self) -> usize {
        self.counts.len()
    }

    fn context_key(&self, context: &[TokenId]) -> Vec<TokenId> {
        let need = self.order - 1;
        if context.len() >= need {
            context[context.len() - need..].to_vec()
        } else {
            let mut key = vec![self.vocab.bos(); need - context.len()];
            key.extend_from_slice(context);
            key
        }
    }

    pub fn next_distribution(&self, context: &[TokenId]) -> TokenDistribution {
        debug_assert!(context.iter().all(|&t| self.vocab.contains_id(t)));
        let v = self.vocab.len();
        let key = self.context_key(context);
        match self.counts.get(&key) {
            Some(c) => {
                let denom = c.total as f64 + self.smoothing * v as f64;
                TokenDistribution::from_raw(
                    c.next
                        .iter()
                        .map(|&n| (n as f64 + self.smoothing) / denom)
                        .collect(),
                )
            }
            None => TokenDistribution::uniform(v),
        }
    }

    /// Samples (or argmaxes at `T = 0`) up to `max_len` tokens after `prompt`.
    pub fn generate<D: DrawSource + ?Sized>(
        &self,
        prompt: &[TokenId],
        max_len: usize,
        temperature: f64,
        draws: &mut D,
    ) -> Result<GenerationOutput> {
        if max_len < 1 {
            return Err(invalid("max_len must be >= 1"));
        }
        if temperature < 0.0 || !temperature.is_finite() {
            return Err(invalid(format!("temperature must be >= 0, got {temperature}")));
        }
        let eos = self.vocab.eos();
        let mut context = prompt.to_vec();
        let start = context.len();
        while context.len() - start < max_len {
            let dist = self.next_distribution(&context);
            let next = if temperature == 0.0 {
                dist.argmax()
            } else {
                draws.pick(apply_temperature(&dist, temperature)?.probs()) as TokenId
            };
            context.push(next);
            if next == eos {
                break;
            }
        }
        Ok(GenerationOutput::new(context.split_off(start), &self.vocab))
    }

    /// Deterministic argmax rollout.
    pub fn greedy(&self, prompt: &[TokenId], max_len: usize) -> Result<GenerationOutput> {
        // T = 0 never consumes a draw
        self.generate(prompt, max_len, 0.0, &mut NoDraws)
    }

    /// Writes the versioned text format: a header line followed by one
    /// `context<TAB>token<TAB>count` line per non-zero count, sorted.
    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "ngram v1 {} {} {} {} {}",
            self.order,
            self.smoothing,
            self.param_count,
            self.model_id,
            self.vocab.len()
        )?;
        let mut contexts: Vec<_> = self.counts.iter().collect();
        contexts.sort_by(|a, b| a.0.cmp(b.0));
        for (ctx, c) in contexts {
            let ctx_str = ctx
                .iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            for (tok, &n) in c.next.iter().enumerate() {
                if n > 0 {
                    writeln!(w, "{ctx_str}\t{tok}\t{n}")?;
                }
            }
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: R, vocab: Arc<Vocabulary>) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header"))??;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 7 || fields[0] != "ngram" || fields[1] != "v1" {
            return Err(parse_err(1, format!("bad header {header:?}")));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| parse_err(1, format!("field {i}: {e}")))
        };
        let order: usize = fields[2]
            .parse()
            .map_err(|e| parse_err(1, format!("order: {e}")))?;
        let smoothing = num(3)?;
        let param_count = num(4)?;
        let model_id = fields[5].to_string();
        let v: usize = fields[6]
            .parse()
            .map_err(|e| parse_err(1, format!("vocabulary size: {e}")))?;
        check_model_args(order, smoothing, param_count, &model_id).map_err(|e| parse_err(1, e.to_string()))?;
        if v != vocab.len() {
            return Err(Error::VocabularyMismatch(format!(
                "model has {v} symbols, vocabulary has {}",
                vocab.len()
            )));
        }

        let mut counts: HashMap<Vec<TokenId>, ContextCounts> = HashMap::new();
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line?;
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 3 {
                return Err(parse_err(lineno, "expected context, token and count"));
            }
            let token_id = |s: &str| -> Result<TokenId> {
                let t: TokenId = s
                    .parse()
                    .map_err(|e| parse_err(lineno, format!("token {s:?}: {e}")))?;
                if (t as usize) < v {
                    Ok(t)
                } else {
                    Err(parse_err(lineno, format!("token {t} out of range")))
                }
            };
            let ctx = if parts[0].is_empty() {
                Vec::new()
            } else {
                parts[0].split(' ').map(token_id).collect::<Result<Vec<_>>>()?
            };
            if ctx.len() != order - 1 {
                return Err(parse_err(lineno, format!("context length {} != {}", ctx.len(), order - 1)));
            }
            let tok = token_id(parts[1])?;
            let n: u64 = parts[2]
                .parse()
                .map_err(|e| parse_err(lineno, format!("count: {e}")))?;
            counts
                .entry(ctx)
                .or_insert_with(|| ContextCounts::new(v))
                .add(tok, n);
        }
        Ok(Self {
            vocab,
            order,
            smoothing,
            param_count,
            model_id,
            counts,
        })
    }
}

struct NoDraws;

impl DrawSource for NoDraws {
    fn pick(&mut self, _weights: &[f64]) -> usize {
        unreachable!("greedy decoding does not sample")
    }
}
