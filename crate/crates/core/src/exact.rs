//! Exact outcome laws of randomized procedures.
//!
//! [`enumerate_law`] replays a procedure against every branch of its
//! [`DrawSource`] decisions and sums path probabilities per outcome, so a
//! sampler's output distribution can be compared with a closed form without
//! Monte Carlo error.

use std::collections::BTreeMap;

use crate::dist::DrawSource;

/// Draw source that follows a prescribed branch prefix, then takes the first
/// positive-weight branch, recording every decision.
#[derive(Debug, Default)]
pub struct ScriptedDraws {
    script: Vec<usize>,
    trace: Vec<(Vec<f64>, usize)>,
}

impl ScriptedDraws {
    fn new(script: Vec<usize>) -> Self {
        Self {
            script,
            trace: Vec::new(),
        }
    }

    fn path_probability(&self) -> f64 {
        self.trace
            .iter()
            .map(|(w, c)| w[*c] / w.iter().sum::<f64>())
            .product()
    }

    fn next_script(&self) -> Option<Vec<usize>> {
        for depth in (0..self.trace.len()).rev() {
            let (w, c) = &self.trace[depth];
            if let Some(next) = (c + 1..w.len()).find(|&i| w[i] > 0.0) {
                let mut script: Vec<usize> = self.trace[..depth].iter().map(|t| t.1).collect();
                script.push(next);
                return Some(script);
            }
        }
        None
    }
}

impl DrawSource for ScriptedDraws {
    fn pick(&mut self, weights: &[f64]) -> usize {
        let depth = self.trace.len();
        let choice = match self.script.get(depth) {
            Some(&c) => c,
            None => weights
                .iter()
                .position(|&w| w > 0.0)
                .expect("draw with no positive weight"),
        };
        self.trace.push((weights.to_vec(), choice));
        choice
    }
}

/// Outcome law of `run`, by depth-first enumeration of all draw sequences.
///
/// `run` must be deterministic given its draws. Panics after `max_paths` paths.
pub fn enumerate_law<T, F>(mut run: F, max_paths: usize) -> BTreeMap<T, f64>
where
    T: Ord,
    F: FnMut(&mut ScriptedDraws) -> T,
{
    let mut law = BTreeMap::new();
    let mut script = Vec::new();
    for _ in 0..max_paths {
        let mut draws = ScriptedDraws::new(script);
        let outcome = run(&mut draws);
        *law.entry(outcome).or_insert(0.0) += draws.path_probability();
        match draws.next_script() {
            Some(s) => script = s,
            None => return law,
        }
    }
    panic!("more than {max_paths} draw paths");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_dice_sum() {
        let law = enumerate_law(
            |d| d.pick(&[1.0; 6]) + d.pick(&[1.0; 6]) + 2,
            100,
        );
        assert_eq!(law.len(), 11);
        assert!((law[&7] - 6.0 / 36.0).abs() < 1e-15);
        let total: f64 = law.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn skips_zero_weight_branches() {
        let law = enumerate_law(|d| d.pick(&[0.0, 3.0, 0.0, 1.0]), 10);
        assert_eq!(law.len(), 2);
        assert!((law[&1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn branch_dependent_draws() {
        // a coin, then a second coin only on heads
        let law = enumerate_law(
            |d| {
                if d.bernoulli(0.25) {
                    1 + d.pick(&[1.0, 1.0])
                } else {
                    0
                }
            },
            10,
        );
        assert!((law[&0] - 0.75).abs() < 1e-15);
        assert!((law[&1] - 0.125).abs() < 1e-15);
        assert!((law[&2] - 0.125).abs() < 1e-15);
    }
}
