use std::hash::Hasher;

use fnv::FnvHasher;

pub const DEFAULT_FEATURE_DIM: usize = 256;

/// Fixed-dimension query representation, L2-normalized (or all zeros).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn cosine(&self, other: &FeatureVector) -> f64 {
        let (a, b) = (self.norm(), other.norm());
        if a == 0.0 || b == 0.0 {
            return 0.0;
        }
        let dot: f64 = self.values.iter().zip(&other.values).map(|(x, y)| x * y).sum();
        dot / (a * b)
    }
}

/// Maps query text to the policy's input vector.
pub trait Featurizer {
    fn dim(&self) -> usize;
    fn featurize(&self, text: &str) -> FeatureVector;
}

/// Hashed character 1-, 2- and 3-gram term frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedNgramFeaturizer {
    dim: usize,
}

impl HashedNgramFeaturizer {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "feature dimension must be >= 1");
        Self { dim }
    }
}

impl Featurizer for HashedNgramFeaturizer {
    fn dim(&self) -> usize {
        self.dim
    }

    fn featurize(&self, text: &str) -> FeatureVector {
        featurize(text, self.dim)
    }
}

/// FNV-1a 64 of each n-gram's UTF-8 bytes, bucket `hash mod dim`.
pub fn featurize(text: &str, dim: usize) -> FeatureVector {
    assert!(dim >= 1, "feature dimension must be >= 1");
    let chars: Vec<char> = text.chars().collect();
    let mut values = vec![0.0; dim];
    let mut bytes = String::new();
    for n in 1..=3 {
        for window in chars.windows(n) {
            bytes.clear();
            bytes.extend(window);
            let mut h = FnvHasher::default();
            h.write(bytes.as_bytes());
            values[(h.finish() % dim as u64) as usize] += 1.0;
        }
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    FeatureVector { values }
}
