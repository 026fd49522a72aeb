//! File-based pipeline steps. Each reads the previous step's files from one
//! output directory and writes its own:
//!
//! | step    | writes                                                     |
//! |---------|------------------------------------------------------------|
//! | synth   | `corpus-<domain>.txt`, `queries-train.tsv`, `queries-test.tsv` |
//! | fit     | `models/<model_id>.ngram`                                  |
//! | collect | `dataset.tsv`                                              |
//! | train   | `policy.bin`                                               |
//! | decode  | `decoded.tsv`                                              |

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use specroute_core::corpus::{read_corpus, read_queries, write_corpus, write_queries, LabeledQuery, Split};
use specroute_core::dataset::{self, RewardSet};
use specroute_core::dist::{derive_seed, seeded_rng};
use specroute_core::ngram::NGramModel;
use specroute_core::policy::PolicyParams;
use specroute_core::router::{Router, SelectionMode};
use specroute_core::specdec::DecodeConfig;
use specroute_core::Vocabulary;

use crate::config::ExperimentConfig;
use crate::error::{BenchError, BenchResult};
use crate::experiment::{build_arms, decode_seed, fit_models, synthesize, train_policy, Setup, SynthData};

/// Query id given to text passed on the command line.
pub const CLI_QUERY_ID: &str = "cli-query";

pub struct Workspace {
    pub dir: PathBuf,
}

impl Workspace {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn corpus(&self, domain: &str) -> PathBuf {
        self.dir.join(format!("corpus-{domain}.txt"))
    }

    pub fn queries(&self, split: Split) -> PathBuf {
        self.dir.join(format!("queries-{split}.tsv"))
    }

    pub fn model(&self, model_id: &str) -> PathBuf {
        self.dir.join("models").join(format!("{model_id}.ngram"))
    }

    pub fn dataset(&self) -> PathBuf {
        self.dir.join("dataset.tsv")
    }

    pub fn policy(&self) -> PathBuf {
        self.dir.join("policy.bin")
    }

    pub fn decoded(&self) -> PathBuf {
        self.dir.join("decoded.tsv")
    }
}

fn create(path: &Path) -> BenchResult<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(BenchError::io(format!("create {}", parent.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(BenchError::io(format!("create {}", path.display())))
}

fn open(path: &Path) -> BenchResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(BenchError::io(format!("open {}", path.display())))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> BenchResult<()> {
    w.flush().map_err(BenchError::io(format!("write {}", path.display())))
}

pub fn cmd_synth(cfg: &ExperimentConfig, seed: u64, ws: &Workspace) -> BenchResult<SynthData> {
    cfg.validate()?;
    let vocab = Vocabulary::stock();
    let data = synthesize(cfg, &vocab, seed)?;
    for (domain, corpus) in &data.corpora {
        let path = ws.corpus(domain);
        let mut w = create(&path)?;
        write_corpus(&mut w, &vocab, corpus)?;
        finish(w, &path)?;
    }
    for (split, queries) in [(Split::Train, &data.train), (Split::Test, &data.test)] {
        let path = ws.queries(split);
        let mut w = create(&path)?;
        write_queries(&mut w, queries)?;
        finish(w, &path)?;
    }
    Ok(data)
}

/// Fits the target and drafters from the corpus files; returns the model ids written.
pub fn cmd_fit(cfg: &ExperimentConfig, ws: &Workspace) -> BenchResult<Vec<String>> {
    cfg.validate()?;
    let vocab = Arc::new(Vocabulary::stock());
    let mut corpora = BTreeMap::new();
    for d in &cfg.domains {
        corpora.insert(d.clone(), read_corpus(open(&ws.corpus(d))?, &vocab)?);
    }
    let (target, drafters) = fit_models(cfg, &vocab, &corpora)?;
    let mut ids = Vec::new();
    for m in std::iter::once(&target).chain(&drafters) {
        let path = ws.model(m.model_id());
        let mut w = create(&path)?;
        m.save(&mut w)?;
        finish(w, &path)?;
        ids.push(m.model_id().to_string());
    }
    Ok(ids)
}

fn load_model(ws: &Workspace, vocab: &Arc<Vocabulary>, model_id: &str) -> BenchResult<NGramModel> {
    let path = ws.model(model_id);
    let model = NGramModel::load(open(&path)?, vocab.clone())?;
    let declared = model.model_id();
    if declared != model_id {
        return Err(BenchError::Config(format!(
            "{} holds model {declared:?}, expected {model_id:?}",
            path.display()
        )));
    }
    Ok(model)
}

fn load_queries(ws: &Workspace, split: Split) -> BenchResult<Vec<LabeledQuery>> {
    Ok(read_queries(open(&ws.queries(split))?)?)
}

/// Rebuilds a [`Setup`] from the files of `synth` and `fit`.
pub fn load_setup(cfg: &ExperimentConfig, seed: u64, ws: &Workspace) -> BenchResult<Setup> {
    cfg.validate()?;
    let vocab = Arc::new(Vocabulary::stock());
    let target = load_model(ws, &vocab, &format!("target-n{}", cfg.target_order))?;
    let drafters = cfg
        .drafter_ids()
        .iter()
        .map(|id| load_model(ws, &vocab, id))
        .collect::<BenchResult<Vec<_>>>()?;
    let arms = build_arms(cfg, &target, drafters);
    let domains = cfg
        .domains
        .iter()
        .map(|d| specroute_core::corpus::DomainSpec::preset(d))
        .collect::<Result<_, _>>()?;
    Ok(Setup {
        seed,
        vocab,
        data: SynthData {
            domains,
            corpora: BTreeMap::new(),
            train: load_queries(ws, Split::Train)?,
            test: load_queries(ws, Split::Test)?,
        },
        target,
        arms,
    })
}

pub fn cmd_collect(cfg: &ExperimentConfig, seed: u64, ws: &Workspace) -> BenchResult<RewardSet> {
    let setup = load_setup(cfg, seed, ws)?;
    let set = setup.collect(cfg, cfg.alpha)?;
    let path = ws.dataset();
    let mut w = create(&path)?;
    dataset::save(&set, &mut w)?;
    finish(w, &path)?;
    Ok(set)
}

pub fn cmd_train(cfg: &ExperimentConfig, seed: u64, ws: &Workspace) -> BenchResult<PolicyParams> {
    cfg.validate()?;
    let set = dataset::load(open(&ws.dataset())?)?;
    let trained = train_policy(cfg, &set, seed)?;
    let path = ws.policy();
    let mut w = create(&path)?;
    trained.params.save(&mut w)?;
    finish(w, &path)?;
    Ok(trained.params)
}

/// One decoded query, as written to `decoded.tsv`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedLine {
    pub query_id: String,
    pub arm_id: String,
    pub policy_probs: Vec<f64>,
    pub target_calls: u64,
    pub tokens: u64,
    pub draft_tokens_generated: u64,
    pub draft_tokens_accepted: u64,
    pub output_text: String,
}

impl DecodedLine {
    /// Tab-separated, without wall-clock fields, so reruns compare byte for byte.
    pub fn to_tsv(&self) -> String {
        let probs: Vec<String> = self.policy_probs.iter().map(|p| p.to_string()).collect();
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.query_id,
            self.arm_id,
            probs.join(","),
            self.target_calls,
            self.tokens,
            self.draft_tokens_generated,
            self.draft_tokens_accepted,
            self.output_text
        )
    }
}

/// Routes `query` (or every test query when `None`) with the trained policy.
pub fn cmd_decode(
    cfg: &ExperimentConfig,
    seed: u64,
    ws: &Workspace,
    query: Option<&str>,
    mode: SelectionMode,
) -> BenchResult<Vec<DecodedLine>> {
    let setup = load_setup(cfg, seed, ws)?;
    let params = PolicyParams::load(open(&ws.policy())?)?;
    let router = Router::new(&params, setup.featurizer(cfg), &setup.arms, &setup.target)?;
    let queries: Vec<(String, String)> = match query {
        Some(text) => vec![(CLI_QUERY_ID.to_string(), text.to_string())],
        None => setup.data.test.iter().map(|q| (q.query_id.clone(), q.text.clone())).collect(),
    };
    let mut lines = Vec::with_capacity(queries.len());
    for (id, text) in &queries {
        let decode = DecodeConfig {
            seed: decode_seed(seed, id),
            ..cfg.decode_config(0)
        };
        let mut rng = seeded_rng(derive_seed(seed, &format!("select/{id}")));
        let r = router.route_and_decode(text, &decode, mode, &mut rng)?;
        lines.push(DecodedLine {
            query_id: id.clone(),
            arm_id: r.arm_id,
            policy_probs: r.policy_probs,
            target_calls: r.stats.target_calls,
            tokens: r.stats.tokens_emitted,
            draft_tokens_generated: r.stats.draft_tokens_generated,
            draft_tokens_accepted: r.stats.draft_tokens_accepted,
            output_text: r.output.text,
        });
    }
    let path = ws.decoded();
    let mut w = create(&path)?;
    for l in &lines {
        writeln!(w, "{}", l.to_tsv()).map_err(BenchError::io(format!("write {}", path.display())))?;
    }
    finish(w, &path)?;
    Ok(lines)
}
