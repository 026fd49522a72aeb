//! Alignment and cost terms of the offline reward.

use crate::error::{invalid, Result};

/// Length of the longest common subsequence, two-row dynamic programme.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut cur = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// ROUGE-L F1 between a candidate and a reference sequence. Empty inputs and
/// sequences with no common subsequence score 0.
pub fn rouge_l<T: PartialEq>(candidate: &[T], reference: &[T]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(candidate, reference);
    if lcs == 0 {
        return 0.0;
    }
    let precision = lcs as f64 / candidate.len() as f64;
    let recall = lcs as f64 / reference.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Fixed size costs `c_i = 1 - exp(p_i - p_max)`.
///
/// Sizes must be in normalized units (the largest model O(1)–O(10)); raw parameter
/// counts would underflow every cost to 1.
pub fn size_costs(param_counts: &[f64]) -> Result<Vec<f64>> {
    if param_counts.is_empty() {
        return Err(invalid("size_costs needs at least one model"));
    }
    if let Some(bad) = param_counts.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(invalid(format!("parameter counts must be positive, got {bad}")));
    }
    let max = param_counts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(param_counts
        .iter()
        .map(|&p| if p == max { 0.0 } else { 1.0 - (p - max).exp() })
        .collect())
}

/// `alpha * alignment + (1 - alpha) * cost`.
pub fn compose_reward(alignment: f64, cost: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("alpha must be in [0, 1], got {alpha}")));
    }
    Ok(alpha * alignment + (1.0 - alpha) * cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rouge_examples() {
        assert_eq!(rouge_l(b"abc", b"abc"), 1.0);
        assert_eq!(rouge_l(b"abc", b"xyz"), 0.0);
        assert_eq!(rouge_l::<u8>(b"", b"abc"), 0.0);
        assert_eq!(rouge_l::<u8>(b"", b""), 0.0);
        // LCS("ace", "abcde") = 3, P = 1, R = 0.6
        assert!((rouge_l(b"ace", b"abcde") - 0.75).abs() < 1e-15);
    }

    #[test]
    fn size_cost_examples() {
        assert_eq!(size_costs(&[2.2, 2.2]).unwrap(), vec![0.0, 0.0]);
        let c = size_costs(&[0.6, 2.2]).unwrap();
        assert!((c[0] - (1.0 - (-1.6f64).exp())).abs() < 1e-15);
        assert!((c[0] - 0.7981).abs() < 1e-4);
        assert_eq!(c[1], 0.0);
        assert!(size_costs(&[1.0, 0.0]).is_err());
        assert!(size_costs(&[-1.0]).is_err());
        assert!(size_costs(&[]).is_err());
    }

    #[test]
    fn reward_endpoints() {
        assert_eq!(compose_reward(0.8, 0.4, 1.0).unwrap(), 0.8);
        assert_eq!(compose_reward(0.8, 0.4, 0.0).unwrap(), 0.4);
        assert!((compose_reward(0.8, 0.4, 0.5).unwrap() - 0.6).abs() < 1e-15);
        assert!(compose_reward(0.8, 0.4, 1.5).is_err());
        assert!(compose_reward(0.8, 0.4, -0.1).is_err());
    }
}
