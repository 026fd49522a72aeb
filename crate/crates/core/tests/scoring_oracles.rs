use proptest::prelude::*;
use rand::Rng;
use specroute_core::dist::seeded_rng;
use specroute_core::scoring::{compose_reward, lcs_len, rouge_l, size_costs};

/// Full (m+1)×(n+1) table, filled top-down.
fn lcs_table(a: &[u32], b: &[u32]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

fn rouge_oracle(c: &[u32], r: &[u32]) -> f64 {
    let l = lcs_table(c, r) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let p = l / c.len() as f64;
    let rec = l / r.len() as f64;
    2.0 * p * rec / (p + rec)
}

#[test]
fn rouge_matches_table_oracle_on_random_pairs() {
    let mut rng = seeded_rng(42);
    for _ in 0..1000 {
        let alphabet = rng.gen_range(1..=6u32);
        let a: Vec<u32> = (0..rng.gen_range(0..=64)).map(|_| rng.gen_range(0..alphabet)).collect();
        let b: Vec<u32> = (0..rng.gen_range(0..=64)).map(|_| rng.gen_range(0..alphabet)).collect();
        assert_eq!(lcs_len(&a, &b), lcs_table(&a, &b));
        assert_eq!(rouge_l(&a, &b), rouge_oracle(&a, &b));
    }
}

#[test]
fn rouge_worked_examples() {
    assert_eq!(rouge_l(&[1, 2, 3], &[1, 2, 3]), 1.0);
    assert_eq!(rouge_l(&[1, 2], &[3, 4]), 0.0);
    assert_eq!(rouge_l::<u32>(&[], &[1]), 0.0);
    // lcs 2, p = 2/3, r = 2/4
    let expect = 2.0 * (2.0 / 3.0) * 0.5 / (2.0 / 3.0 + 0.5);
    assert!((rouge_l(&[1, 9, 2], &[1, 2, 7, 7]) - expect).abs() < 1e-15);
}

#[test]
fn size_cost_values() {
    let c = size_costs(&[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(c[2], 0.0);
    assert!((c[0] - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    assert!((c[1] - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    assert!(size_costs(&[]).is_err());
    assert!(size_costs(&[1.0, 0.0]).is_err());
    assert!(compose_reward(0.5, 0.5, 1.5).is_err());
}

proptest! {
    #[test]
    fn rouge_is_symmetric_and_bounded(
        a in prop::collection::vec(0u8..5, 0..40),
        b in prop::collection::vec(0u8..5, 0..40),
    ) {
        let f = rouge_l(&a, &b);
        prop_assert_eq!(f, rouge_l(&b, &a));
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn size_costs_decrease_with_size(sizes in prop::collection::vec(0.01f64..10.0, 1..8)) {
        let c = size_costs(&sizes).unwrap();
        let max = sizes.iter().cloned().fold(f64::MIN, f64::max);
        for i in 0..sizes.len() {
            prop_assert!((0.0..1.0).contains(&c[i]));
            if sizes[i] == max {
                prop_assert_eq!(c[i], 0.0);
            }
            for j in 0..sizes.len() {
                if sizes[i] < sizes[j] {
                    prop_assert!(c[i] > c[j]);
                }
            }
        }
    }

    #[test]
    fn reward_is_linear_in_alpha(f in 0.0f64..1.0, c in 0.0f64..1.0, alpha in 0.01f64..0.99) {
        let h = 1e-6;
        let slope = (compose_reward(f, c, alpha + h).unwrap() - compose_reward(f, c, alpha - h).unwrap()) / (2.0 * h);
        prop_assert!((slope - (f - c)).abs() < 1e-6);
        prop_assert_eq!(compose_reward(f, c, 1.0).unwrap(), f);
        prop_assert_eq!(compose_reward(f, c, 0.0).unwrap(), c);
    }
}
