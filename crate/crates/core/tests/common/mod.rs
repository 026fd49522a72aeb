#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use specroute_core::dist::seeded_rng;
use specroute_core::ngram::{fit_ngram, NGramModel};
use specroute_core::{TokenId, Vocabulary};

/// Vocabulary of `symbols` plain characters plus `<s>`/`</s>`.
pub fn small_vocab(symbols: usize) -> Arc<Vocabulary> {
    let chars: String = "abcdefghijklmnop".chars().take(symbols).collect();
    Arc::new(Vocabulary::from_characters(&chars).unwrap())
}

/// Random corpus over the non-reserved symbols, with an occasional `</s>` terminator.
pub fn random_corpus<R: Rng>(vocab: &Vocabulary, n: usize, max_len: usize, rng: &mut R) -> Vec<Vec<TokenId>> {
    let v = vocab.len() as TokenId;
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=max_len);
            let mut seq: Vec<TokenId> = (0..len).map(|_| rng.gen_range(2..v)).collect();
            if rng.gen_bool(0.3) {
                seq.push(vocab.eos());
            }
            seq
        })
        .collect()
}

pub fn random_model(vocab: &Arc<Vocabulary>, seed: u64, id: &str) -> NGramModel {
    let mut rng = seeded_rng(seed);
    let order = rng.gen_range(1..=3);
    let n = rng.gen_range(1..=30);
    let corpus = random_corpus(vocab, n, 10, &mut rng);
    let smoothing = rng.gen_range(0.01..1.0);
    fit_ngram(vocab.clone(), &corpus, order, smoothing, 1.0, id).unwrap()
}

pub fn random_context<R: Rng>(vocab: &Vocabulary, max_len: usize, rng: &mut R) -> Vec<TokenId> {
    let v = vocab.len() as TokenId;
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| rng.gen_range(2..v)).collect()
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
