//! Deterministic multi-domain synthetic corpora and query sets.
//!
//! Each domain draws text from its own alphabet with one generative rule. Stock
//! presets keep alphabets disjoint so that drafters fitted on one domain know
//! nothing about the others.

use std::collections::HashSet;
use std::fmt;
use std::hash::Hasher;
use std::io::{BufRead, Write};
use std::str::FromStr;

use fnv::FnvHasher;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dist::{derive_seed, seeded_rng, DrawSource};
use crate::error::{invalid, parse_err, Result};
use crate::vocab::{TokenId, Vocabulary};

/// Largest Jaccard overlap allowed between the alphabets of two domains in one experiment.
pub const MAX_ALPHABET_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum PatternRule {
    /// Repeats one of `units` (chosen uniformly per sequence). With `random_phase`
    /// the sequence starts at a random offset into the unit; each character is
    /// independently replaced by a uniform alphabet symbol with probability `noise`.
    PeriodicRepeat {
        units: Vec<String>,
        noise: f64,
        random_phase: bool,
    },
    /// First-order chain over the alphabet; rows of `transitions` are indexed by
    /// alphabet position.
    MarkovChain {
        initial: Vec<f64>,
        transitions: Vec<Vec<f64>>,
    },
    /// Comma-style lists `s, s+d, s+2d, ...` with `s ∈ [0, max_start]` and
    /// `d ∈ [min_step, max_step]`.
    ArithmeticSequence {
        max_start: u32,
        min_step: u32,
        max_step: u32,
        separator: char,
    },
}

impl PatternRule {
    pub fn pattern_id(&self) -> &'static str {
        match self {
            Self::PeriodicRepeat { .. } => "periodic-repeat",
            Self::MarkovChain { .. } => "markov-chain",
            Self::ArithmeticSequence { .. } => "arithmetic-sequence",
        }
    }

    /// Default rule for a pattern identifier over `alphabet`.
    pub fn from_pattern_id(pattern_id: &str, alphabet: &[char]) -> Result<Self> {
        match pattern_id {
            "periodic-repeat" => Ok(Self::PeriodicRepeat {
                units: vec![alphabet.iter().collect()],
                noise: 0.0,
                random_phase: false,
            }),
            "markov-chain" => {
                let n = alphabet.len();
                Ok(Self::MarkovChain {
                    initial: vec![1.0 / n as f64; n],
                    transitions: cyclic_transitions(n, 0.7, 0.2),
                })
            }
            "arithmetic-sequence" => Ok(Self::ArithmeticSequence {
                max_start: 50,
                min_step: 1,
                max_step: 9,
                separator: ',',
            }),
            other => Err(invalid(format!("unknown pattern id {other:?}"))),
        }
    }
}

/// Transition table where state `i` moves to `i+1` with probability `main`, to
/// `i+3` with `second`, and spreads the rest evenly.
fn cyclic_transitions(n: usize, main: f64, second: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            if n == 1 {
                return vec![1.0];
            }
            let mut row = vec![0.0; n];
            let rest = (1.0 - main - second).max(0.0);
            let others = n.saturating_sub(2).max(1) as f64;
            for (j, p) in row.iter_mut().enumerate() {
                if j != (i + 1) % n && j != (i + 3) % n {
                    *p = rest / others;
                }
            }
            row[(i + 1) % n] += main;
            row[(i + 3) % n] += second;
            let total: f64 = row.iter().sum();
            row.iter().map(|p| p / total).collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub domain_id: String,
    pub alphabet: Vec<char>,
    pub rule: PatternRule,
    pub query_prefix_len: usize,
}

pub const STOCK_DOMAINS: [&str; 3] = ["periodic", "markov", "digits"];

impl DomainSpec {
    /// Stock domains: `periodic`, `markov` and `digits`.
    pub fn preset(name: &str) -> Result<Self> {
        let spec = match name {
            "periodic" => Self {
                domain_id: name.into(),
                alphabet: "abcdefgh".chars().collect(),
                rule: PatternRule::PeriodicRepeat {
                    units: vec!["abacad".into(), "efgehf".into(), "hdhgdg".into()],
                    noise: 0.08,
                    random_phase: true,
                },
                query_prefix_len: 16,
            },
            "markov" => {
                let alphabet: Vec<char> = "ijklmnop".chars().collect();
                let n = alphabet.len();
                Self {
                    domain_id: name.into(),
                    rule: PatternRule::MarkovChain {
                        initial: vec![1.0 / n as f64; n],
                        transitions: cyclic_transitions(n, 0.7, 0.2),
                    },
                    alphabet,
                    query_prefix_len: 16,
                }
            }
            "digits" => Self {
                domain_id: name.into(),
                alphabet: "0123456789,".chars().collect(),
                rule: PatternRule::from_pattern_id("arithmetic-sequence", &[])?,
                query_prefix_len: 16,
            },
            other => return Err(invalid(format!("unknown domain preset {other:?}"))),
        };
        Ok(spec)
    }

    pub fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        if self.alphabet.is_empty() {
            return Err(invalid(format!("domain {}: empty alphabet", self.domain_id)));
        }
        if self.query_prefix_len == 0 {
            return Err(invalid(format!("domain {}: query_prefix_len must be >= 1", self.domain_id)));
        }
        let mut buf = [0u8; 4];
        for c in &self.alphabet {
            if vocab.id(c.encode_utf8(&mut buf)).is_none() {
                return Err(invalid(format!(
                    "domain {}: symbol {c:?} not in vocabulary",
                    self.domain_id
                )));
            }
        }
        let in_alphabet = |c: &char| self.alphabet.contains(c);
        match &self.rule {
            PatternRule::PeriodicRepeat { units, noise, .. } => {
                if units.is_empty() || units.iter().any(|u| u.is_empty()) {
                    return Err(invalid("periodic-repeat needs non-empty units"));
                }
                if !units.iter().all(|u| u.chars().all(|c| in_alphabet(&c))) {
                    return Err(invalid("periodic-repeat units must use the domain alphabet"));
                }
                if !(0.0..=1.0).contains(noise) {
                    return Err(invalid("periodic-repeat noise must be in [0, 1]"));
                }
            }
            PatternRule::MarkovChain {
                initial,
                transitions,
            } => {
                let n = self.alphabet.len();
                let row_ok = |row: &Vec<f64>| {
                    row.len() == n
                        && row.iter().all(|p| p.is_finite() && *p >= 0.0)
                        && (row.iter().sum::<f64>() - 1.0).abs() < 1e-9
                };
                if !row_ok(initial) || transitions.len() != n || !transitions.iter().all(row_ok) {
                    return Err(invalid(
                        "markov-chain needs a normalized initial vector and an n×n stochastic matrix",
                    ));
                }
            }
            PatternRule::ArithmeticSequence {
                min_step,
                max_step,
                separator,
                ..
            } => {
                if min_step > max_step {
                    return Err(invalid("arithmetic-sequence needs min_step <= max_step"));
                }
                let needed = "0123456789".chars().chain(std::iter::once(*separator));
                if !needed.into_iter().all(|c| in_alphabet(&c)) {
                    return Err(invalid("arithmetic-sequence alphabet must hold digits and separator"));
                }
            }
        }
        Ok(())
    }

    /// Draws one string of exactly `len` characters from the rule.
    fn sample_text(&self, len: usize, rng: &mut ChaCha8Rng) -> String {
        match &self.rule {
            PatternRule::PeriodicRepeat {
                units,
                noise,
                random_phase,
            } => {
                let unit: Vec<char> = units[rng.gen_range(0..units.len())].chars().collect();
                let phase = if *random_phase {
                    rng.gen_range(0..unit.len())
                } else {
                    0
                };
                (0..len)
                    .map(|i| {
                        if *noise > 0.0 && rng.gen::<f64>() < *noise {
                            self.alphabet[rng.gen_range(0..self.alphabet.len())]
                        } else {
                            unit[(phase + i) % unit.len()]
                        }
                    })
                    .collect()
            }
            PatternRule::MarkovChain {
                initial,
                transitions,
            } => {
                let mut out = String::with_capacity(len);
                let mut state = rng.pick(initial);
                for _ in 0..len {
                    out.push(self.alphabet[state]);
                    state = rng.pick(&transitions[state]);
                }
                out
            }
            PatternRule::ArithmeticSequence {
                max_start,
                min_step,
                max_step,
                separator,
            } => {
                let mut value = rng.gen_range(0..=*max_start) as u64;
                let step = rng.gen_range(*min_step..=*max_step) as u64;
                let mut out = String::with_capacity(len + 8);
                while out.chars().count() < len {
                    out.push_str(&value.to_string());
                    out.push(*separator);
                    value += step;
                }
                out.chars().take(len).collect()
            }
        }
    }
}

/// Jaccard overlap of two alphabets.
pub fn alphabet_overlap(a: &[char], b: &[char]) -> f64 {
    let a: HashSet<char> = a.iter().copied().collect();
    let b: HashSet<char> = b.iter().copied().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Checks a set of domains can live in one experiment: unique ids and pairwise
/// alphabet overlap at most [`MAX_ALPHABET_OVERLAP`].
pub fn validate_domains(specs: &[DomainSpec], vocab: &Vocabulary) -> Result<()> {
    let mut seen = HashSet::new();
    for (i, s) in specs.iter().enumerate() {
        s.validate(vocab)?;
        if !seen.insert(s.domain_id.as_str()) {
            return Err(invalid(format!("duplicate domain id {:?}", s.domain_id)));
        }
        for t in &specs[i + 1..] {
            let j = alphabet_overlap(&s.alphabet, &t.alphabet);
            if j > MAX_ALPHABET_OVERLAP {
                return Err(invalid(format!(
                    "domains {} and {} overlap too much (Jaccard {j:.3})",
                    s.domain_id, t.domain_id
                )));
            }
        }
    }
    Ok(())
}

/// Draws `n_sequences` token sequences of `seq_len` symbols (no reserved tokens).
pub fn make_corpus(
    spec: &DomainSpec,
    vocab: &Vocabulary,
    n_sequences: usize,
    seq_len: usize,
    seed: u64,
) -> Result<Vec<Vec<TokenId>>> {
    if n_sequences < 1 {
        return Err(invalid("n_sequences must be >= 1"));
    }
    spec.validate(vocab)?;
    let mut rng = seeded_rng(derive_seed(seed, &format!("corpus/{}", spec.domain_id)));
    (0..n_sequences)
        .map(|_| vocab.encode(&spec.sample_text(seq_len, &mut rng)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    /// Split a query text belongs to; the partition is a function of the text alone,
    /// so the two splits can never share a query.
    pub fn of_text(text: &str) -> Split {
        let mut h = FnvHasher::default();
        h.write(text.as_bytes());
        if h.finish() % 2 == 0 {
            Split::Train
        } else {
            Split::Test
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(invalid(format!("unknown split {other:?}"))),
        }
    }
}

/// A query prompt. `true_domain` is kept for evaluation only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledQuery {
    pub query_id: String,
    pub text: String,
    pub true_domain: String,
}

/// Bounded rejection budget per requested query.
const QUERY_ATTEMPTS_PER_ITEM: usize = 1000;

/// Balanced, shuffled query set: `n_per_domain` prefixes from each domain, all
/// belonging to `split`.
pub fn make_query_set(
    specs: &[DomainSpec],
    vocab: &Vocabulary,
    n_per_domain: usize,
    split: Split,
    seed: u64,
) -> Result<Vec<LabeledQuery>> {
    if specs.is_empty() {
        return Err(invalid("need at least one domain"));
    }
    validate_domains(specs, vocab)?;
    let mut queries = Vec::with_capacity(specs.len() * n_per_domain);
    for spec in specs {
        let mut rng = seeded_rng(derive_seed(
            seed,
            &format!("queries/{split}/{}", spec.domain_id),
        ));
        let budget = QUERY_ATTEMPTS_PER_ITEM * (n_per_domain + 1);
        let mut attempts = 0;
        let mut made = 0;
        while made < n_per_domain {
            attempts += 1;
            if attempts > budget {
                return Err(invalid(format!(
                    "domain {} cannot produce {n_per_domain} distinct {split} queries",
                    spec.domain_id
                )));
            }
            let text = spec.sample_text(spec.query_prefix_len, &mut rng);
            if Split::of_text(&text) != split {
                continue;
            }
            queries.push(LabeledQuery {
                query_id: format!("{split}-{}-{made:05}", spec.domain_id),
                text,
                true_domain: spec.domain_id.clone(),
            });
            made += 1;
        }
    }
    let mut rng = seeded_rng(derive_seed(seed, &format!("queries/{split}/shuffle")));
    queries.shuffle(&mut rng);
    Ok(queries)
}

/// `query_id<TAB>true_domain<TAB>text` per line.
pub fn write_queries<W: Write>(mut w: W, queries: &[LabeledQuery]) -> Result<()> {
    for q in queries {
        for field in [&q.query_id, &q.true_domain, &q.text] {
            if field.contains(['\t', '\n', '\r']) {
                return Err(invalid(format!("query field {field:?} contains a tab or newline")));
            }
        }
        writeln!(w, "{}\t{}\t{}", q.query_id, q.true_domain, q.text)?;
    }
    Ok(())
}

pub fn read_queries<R: BufRead>(r: R) -> Result<Vec<LabeledQuery>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(id), Some(domain), Some(text)) if !text.is_empty() => out.push(LabeledQuery {
                query_id: id.to_string(),
                text: text.to_string(),
                true_domain: domain.to_string(),
            }),
            _ => return Err(parse_err(i + 1, "expected query_id, true_domain and non-empty text")),
        }
    }
    Ok(out)
}

/// One sequence per line, as text.
pub fn write_corpus<W: Write>(mut w: W, vocab: &Vocabulary, corpus: &[Vec<TokenId>]) -> Result<()> {
    for seq in corpus {
        writeln!(w, "{}", vocab.decode(seq))?;
    }
    Ok(())
}

pub fn read_corpus<R: BufRead>(r: R, vocab: &Vocabulary) -> Result<Vec<Vec<TokenId>>> {
    r.lines()
        .enumerate()
        .map(|(i, line)| {
            vocab
                .encode(&line?)
                .map_err(|e| parse_err(i + 1, e.to_string()))
        })
        .collect()
}
