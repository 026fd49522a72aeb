//! Multi-seed experiment drivers behind `bench`, `sweep-alpha`, `curve` and `sweep`.

use std::collections::BTreeMap;

use specroute_core::dataset::RewardSet;
use specroute_core::router::SelectionMode;
use specroute_core::specdec::DecodeConfig;

use crate::config::ExperimentConfig;
use crate::error::{BenchError, BenchResult};
use crate::experiment::{evaluate, QueryOutcome, Setup, Strategy};
use crate::report::{aggregate, BenchReport};

/// Per-seed facts kept alongside a report for checks that need more than means.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedDiagnostics {
    pub seed: u64,
    pub arm_ids: Vec<String>,
    /// Mean alignment per `(true_domain, arm_id)` over the training records.
    pub mean_alignment: BTreeMap<(String, String), f64>,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: BenchReport,
    pub outcomes: Vec<QueryOutcome>,
    pub diagnostics: Vec<SeedDiagnostics>,
}

fn seeds_of(cfg: &ExperimentConfig) -> BenchResult<&[u64]> {
    cfg.validate()?;
    Ok(&cfg.seeds)
}

fn alignment_by_domain(set: &RewardSet) -> BTreeMap<(String, String), f64> {
    let mut acc: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for r in &set.records {
        let domain = r.meta.get("true_domain").cloned().unwrap_or_default();
        let e = acc.entry((domain, r.arm_id.clone())).or_default();
        e.0 += r.alignment;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

fn param(key: &str, value: impl ToString) -> BTreeMap<String, String> {
    BTreeMap::from([(key.to_string(), value.to_string())])
}

/// Baseline, every fixed drafter and both policy modes on each domain's test split.
pub fn run_bench(cfg: &ExperimentConfig) -> BenchResult<RunOutput> {
    let mut outcomes = Vec::new();
    let mut diagnostics = Vec::new();
    for &seed in seeds_of(cfg)? {
        let setup = Setup::new(cfg, seed)?;
        let dataset = setup.collect(cfg, cfg.alpha)?;
        let policy = setup.train(cfg, &dataset)?;
        let strategies = Strategy::standard(&setup.arms, true);
        outcomes.extend(evaluate(&setup, cfg, &cfg.decode_config(0), Some(&policy.params), &strategies)?);
        diagnostics.push(SeedDiagnostics {
            seed,
            arm_ids: setup.arm_ids(),
            mean_alignment: alignment_by_domain(&dataset),
            epoch_losses: policy.epoch_losses,
        });
    }
    Ok(RunOutput {
        report: BenchReport {
            title: format!("bench: {}", cfg.recipe),
            rows: aggregate(&outcomes, &BTreeMap::new()),
        },
        outcomes,
        diagnostics,
    })
}

/// Retrains per alpha (rewards recomposed from the same rollouts) and routes
/// the test split greedily.
pub fn run_sweep_alpha(cfg: &ExperimentConfig, alphas: &[f64]) -> BenchResult<RunOutput> {
    if alphas.is_empty() || alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(BenchError::Config("alphas must be non-empty and within [0, 1]".into()));
    }
    let mut rows = Vec::new();
    let mut all = Vec::new();
    let mut per_alpha: Vec<Vec<QueryOutcome>> = vec![Vec::new(); alphas.len()];
    let mut diagnostics = Vec::new();
    for &seed in seeds_of(cfg)? {
        let setup = Setup::new(cfg, seed)?;
        let mut sizes: Vec<f64> = setup.arms.iter().map(|a| a.param_count).collect();
        sizes.sort_by(f64::total_cmp);
        sizes.dedup();
        if sizes.len() < 2 {
            return Err(BenchError::Config("alpha sweep needs arms of distinct sizes".into()));
        }
        let dataset = setup.collect(cfg, 1.0)?;
        for (i, &alpha) in alphas.iter().enumerate() {
            let policy = setup.train(cfg, &dataset.with_alpha(alpha)?)?;
            let outs = evaluate(
                &setup,
                cfg,
                &cfg.decode_config(0),
                Some(&policy.params),
                &[Strategy::Policy(SelectionMode::Greedy)],
            )?;
            per_alpha[i].extend(outs);
        }
        diagnostics.push(SeedDiagnostics {
            seed,
            arm_ids: setup.arm_ids(),
            mean_alignment: alignment_by_domain(&dataset),
            epoch_losses: Vec::new(),
        });
    }
    for (alpha, outs) in alphas.iter().zip(per_alpha) {
        rows.extend(aggregate(&outs, &param("alpha", alpha)));
        all.extend(outs);
    }
    Ok(RunOutput {
        report: BenchReport {
            title: format!("sweep-alpha: {}", cfg.recipe),
            rows,
        },
        outcomes: all,
        diagnostics,
    })
}

/// Trains on growing dataset prefixes. Fixed-drafter rows carry `records=none`.
pub fn run_curve(cfg: &ExperimentConfig, sizes: &[usize]) -> BenchResult<RunOutput> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(BenchError::Config("curve sizes must be positive and strictly ascending".into()));
    }
    let mut baseline = Vec::new();
    let mut per_size: BTreeMap<usize, Vec<QueryOutcome>> = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for &seed in seeds_of(cfg)? {
        let setup = Setup::new(cfg, seed)?;
        let dataset = setup.collect(cfg, cfg.alpha)?;
        let fixed: Vec<Strategy> = Strategy::standard(&setup.arms, false);
        baseline.extend(evaluate(&setup, cfg, &cfg.decode_config(0), None, &fixed)?);
        for &size in sizes {
            let used = size.min(dataset.len());
            let policy = setup.train(cfg, &dataset.prefix(used))?;
            let outs = evaluate(
                &setup,
                cfg,
                &cfg.decode_config(0),
                Some(&policy.params),
                &[Strategy::Policy(SelectionMode::Greedy)],
            )?;
            per_size.entry(used).or_default().extend(outs);
            if used == dataset.len() {
                break;
            }
        }
        diagnostics.push(SeedDiagnostics {
            seed,
            arm_ids: setup.arm_ids(),
            mean_alignment: alignment_by_domain(&dataset),
            epoch_losses: Vec::new(),
        });
    }
    let mut rows = aggregate(&baseline, &param("records", "none"));
    let mut outcomes = baseline;
    for (size, outs) in per_size {
        rows.extend(aggregate(&outs, &param("records", size)));
        outcomes.extend(outs);
    }
    Ok(RunOutput {
        report: BenchReport {
            title: format!("curve: {}", cfg.recipe),
            rows,
        },
        outcomes,
        diagnostics,
    })
}

/// One trained policy per seed, evaluated under every (gamma, temperature) pair.
pub fn run_decode_sweep(cfg: &ExperimentConfig, gammas: &[usize], temperatures: &[f64]) -> BenchResult<RunOutput> {
    let mut cells: BTreeMap<(usize, usize), Vec<QueryOutcome>> = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for &seed in seeds_of(cfg)? {
        let setup = Setup::new(cfg, seed)?;
        let dataset = setup.collect(cfg, cfg.alpha)?;
        let policy = setup.train(cfg, &dataset)?;
        let strategies = Strategy::standard(&setup.arms, true);
        for (gi, &gamma) in gammas.iter().enumerate() {
            for (ti, &temperature) in temperatures.iter().enumerate() {
                let decode = DecodeConfig {
                    gamma,
                    temperature,
                    ..cfg.decode_config(0)
                };
                decode.validate().map_err(|e| BenchError::Config(e.to_string()))?;
                cells
                    .entry((gi, ti))
                    .or_default()
                    .extend(evaluate(&setup, cfg, &decode, Some(&policy.params), &strategies)?);
            }
        }
        diagnostics.push(SeedDiagnostics {
            seed,
            arm_ids: setup.arm_ids(),
            mean_alignment: alignment_by_domain(&dataset),
            epoch_losses: policy.epoch_losses,
        });
    }
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for ((gi, ti), outs) in cells {
        let mut params = param("gamma", gammas[gi]);
        params.insert("temperature".into(), temperatures[ti].to_string());
        rows.extend(aggregate(&outs, &params));
        outcomes.extend(outs);
    }
    Ok(RunOutput {
        report: BenchReport {
            title: format!("sweep: {}", cfg.recipe),
            rows,
        },
        outcomes,
        diagnostics,
    })
}
