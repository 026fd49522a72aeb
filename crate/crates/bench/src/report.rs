//! Seed-aggregated report rows, rendered as an aligned table and as JSON lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{BenchError, BenchResult};
use crate::experiment::QueryOutcome;

pub const REPORT_SCHEMA: &str = "specroute-report/v1";

/// Task label of the row pooling every domain.
pub const MIXED_TASK: &str = "mixed";

/// Mean over seeds; `std` is the sample deviation and needs two seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() >= 2)
            .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Some(Stat { mean, std })
    }

    fn show(&self, scale: f64, digits: usize) -> String {
        match self.std {
            Some(s) => format!("{:.*} ± {:.*}", digits, self.mean * scale, digits, s * scale),
            None => format!("{:.*}", digits, self.mean * scale),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub schema: &'static str,
    pub task: String,
    pub strategy: String,
    /// Coordinates of the cell in a sweep, such as `alpha` or `records`.
    pub params: BTreeMap<String, String>,
    pub seeds: usize,
    /// Decoded queries summed over seeds.
    pub queries: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ms_per_token: Option<Stat>,
    pub target_calls_per_token: Stat,
    /// Absent when the strategy never drafts.
    pub accept_rate_pct: Option<Stat>,
    pub quality: Stat,
    pub selections: BTreeMap<String, usize>,
}

impl ReportRow {
    /// Fraction of decoded queries that used `arm_id`.
    pub fn share(&self, arm_id: &str) -> f64 {
        self.selections.get(arm_id).copied().unwrap_or(0) as f64 / self.queries as f64
    }
}

#[derive(Default)]
struct SeedTotals {
    tokens: u64,
    target_calls: u64,
    drafted: u64,
    accepted: u64,
    wall_ns: u64,
    quality: f64,
    queries: usize,
}

/// One row per (task, strategy) with a pooled `mixed` task, tasks sorted and
/// strategies in first-seen order.
pub fn aggregate(outcomes: &[QueryOutcome], params: &BTreeMap<String, String>) -> Vec<ReportRow> {
    let mut strategies: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<(String, &str), BTreeMap<u64, SeedTotals>> = BTreeMap::new();
    let mut selections: BTreeMap<(String, &str), BTreeMap<String, usize>> = BTreeMap::new();
    for o in outcomes {
        if !strategies.contains(&o.strategy.as_str()) {
            strategies.push(&o.strategy);
        }
        for task in [o.task.clone(), MIXED_TASK.to_string()] {
            let t = cells
                .entry((task.clone(), &o.strategy))
                .or_default()
                .entry(o.seed)
                .or_default();
            t.tokens += o.stats.tokens_emitted;
            t.target_calls += o.stats.target_calls;
            t.drafted += o.stats.draft_tokens_generated;
            t.accepted += o.stats.draft_tokens_accepted;
            t.wall_ns += o.stats.wall_ns_total;
            t.quality += o.quality;
            t.queries += 1;
            *selections
                .entry((task, &o.strategy))
                .or_default()
                .entry(o.arm_id.clone())
                .or_default() += 1;
        }
    }

    let mut tasks: Vec<String> = cells.keys().map(|(t, _)| t.clone()).filter(|t| t != MIXED_TASK).collect();
    tasks.dedup();
    tasks.push(MIXED_TASK.to_string());

    let mut rows = Vec::new();
    for task in &tasks {
        for &strategy in &strategies {
            let Some(per_seed) = cells.get(&(task.clone(), strategy)) else {
                continue;
            };
            let collect = |f: &dyn Fn(&SeedTotals) -> Option<f64>| -> Vec<f64> { per_seed.values().filter_map(f).collect() };
            let per_token = |x: u64, t: &SeedTotals| (t.tokens > 0).then(|| x as f64 / t.tokens as f64);
            rows.push(ReportRow {
                schema: REPORT_SCHEMA,
                task: task.clone(),
                strategy: strategy.to_string(),
                params: params.clone(),
                seeds: per_seed.len(),
                queries: per_seed.values().map(|t| t.queries).sum(),
                ms_per_token: Stat::of(&collect(&|t| per_token(t.wall_ns, t).map(|v| v / 1e6))),
                target_calls_per_token: Stat::of(&collect(&|t| per_token(t.target_calls, t))).unwrap_or(Stat {
                    mean: 0.0,
                    std: None,
                }),
                accept_rate_pct: Stat::of(&collect(&|t| {
                    (t.drafted > 0).then(|| 100.0 * t.accepted as f64 / t.drafted as f64)
                })),
                quality: Stat::of(&collect(&|t| Some(t.quality / t.queries as f64))).expect("non-empty cell"),
                selections: selections[&(task.clone(), strategy)].clone(),
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub title: String,
    pub rows: Vec<ReportRow>,
}

impl BenchReport {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            rows: Vec::new(),
        }
    }

    /// The row for `(task, strategy)` whose params contain every pair in `params`.
    pub fn find(&self, task: &str, strategy: &str, params: &[(&str, &str)]) -> Option<&ReportRow> {
        self.rows.iter().find(|r| {
            r.task == task
                && r.strategy == strategy
                && params.iter().all(|(k, v)| r.params.get(*k).map(String::as_str) == Some(*v))
        })
    }

    /// Copy with wall-clock fields dropped, for byte-level comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.rows.iter_mut().for_each(|row| row.ms_per_token = None);
        r
    }

    pub fn to_jsonl(&self) -> String {
        self.rows
            .iter()
            .map(|r| serde_json::to_string(r).expect("row serializes") + "\n")
            .collect()
    }

    pub fn to_table(&self) -> String {
        let param_keys: Vec<String> = {
            let mut keys: Vec<String> = self.rows.iter().flat_map(|r| r.params.keys().cloned()).collect();
            keys.sort();
            keys.dedup();
            keys
        };
        let mut header: Vec<String> = param_keys.clone();
        header.extend(
            ["task", "strategy", "seeds", "ms/token", "calls/token", "accept %", "quality", "selections"]
                .map(String::from),
        );
        let mut lines: Vec<Vec<String>> = vec![header];
        for r in &self.rows {
            let mut cells: Vec<String> = param_keys
                .iter()
                .map(|k| r.params.get(k).cloned().unwrap_or_else(|| "-".into()))
                .collect();
            cells.push(r.task.clone());
            cells.push(r.strategy.clone());
            cells.push(r.seeds.to_string());
            cells.push(r.ms_per_token.map_or("-".into(), |s| s.show(1.0, 4)));
            cells.push(r.target_calls_per_token.show(1.0, 4));
            cells.push(r.accept_rate_pct.map_or("-".into(), |s| s.show(1.0, 2)));
            cells.push(r.quality.show(1.0, 3));
            cells.push(
                r.selections
                    .iter()
                    .map(|(arm, n)| format!("{arm}={n}"))
                    .collect::<Vec<_>>()
                    .join(" "),
            );
            lines.push(cells);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = format!("# {}\n", self.title);
        for (i, l) in lines.iter().enumerate() {
            let last = l.len() - 1;
            for (c, cell) in l.iter().enumerate() {
                if c == last {
                    out.push_str(cell);
                } else {
                    let _ = write!(out, "{:<w$}  ", cell, w = widths[c]);
                }
            }
            out.push('\n');
            if i == 0 {
                out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
                out.push('\n');
            }
        }
        out
    }

    /// Writes `<stem>.txt` and `<stem>.jsonl` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> BenchResult<()> {
        std::fs::create_dir_all(dir).map_err(BenchError::io(format!("create {}", dir.display())))?;
        for (ext, body) in [("txt", self.to_table()), ("jsonl", self.to_jsonl())] {
            let path = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, body).map_err(BenchError::io(format!("write {}", path.display())))?;
        }
        Ok(())
    }
}
