use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use specroute::commands::{cmd_collect, cmd_decode, cmd_fit, cmd_synth, cmd_train, Workspace};
use specroute::runs::{run_bench, run_curve, run_decode_sweep, run_sweep_alpha};
use specroute::{BenchError, BenchResult, ExperimentConfig};
use specroute_core::router::SelectionMode;

#[derive(Parser)]
#[command(name = "specroute", version, about = "Draft-model routing experiments for speculative decoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat TOML config; a `recipe` key selects the base recipe.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base recipe when no config file is given.
    #[arg(long, global = true)]
    recipe: Option<String>,

    /// Comma-separated seeds. File commands use the first.
    #[arg(long, global = true, value_delimiter = ',')]
    seed: Option<Vec<u64>>,

    #[arg(long, global = true)]
    gamma: Option<usize>,

    #[arg(long, global = true)]
    temperature: Option<f64>,

    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Arm selection at inference: greedy or dynamic.
    #[arg(long, global = true, default_value = "greedy")]
    mode: SelectionMode,

    /// Output directory.
    #[arg(long, global = true, default_value = "specroute-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective config.
    Config,
    /// Generate corpora and train/test query files.
    Synth,
    /// Fit the target and drafter n-gram models.
    Fit,
    /// Build the offline reward dataset.
    Collect,
    /// Train the routing policy.
    Train,
    /// Route and decode one query, or the whole test split.
    Decode {
        #[arg(long)]
        query: Option<String>,
    },
    /// Baseline, fixed drafters and routed policies on every domain.
    Bench,
    /// Arm-selection shares across alpha values.
    SweepAlpha {
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// Routed efficiency against training-set size in records.
    Curve {
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Every (gamma, temperature) pair.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        temperatures: Option<Vec<f64>>,
    },
}

fn load_config(cli: &Cli) -> BenchResult<ExperimentConfig> {
    let mut cfg = match (&cli.config, &cli.recipe) {
        (Some(_), Some(_)) => return Err(BenchError::Config("pass either --config or --recipe".into())),
        (Some(path), None) => ExperimentConfig::from_file(path)?,
        (None, Some(name)) => ExperimentConfig::recipe(name)?,
        (None, None) => ExperimentConfig::recipe("two-domain")?,
    };
    if let Some(seeds) = &cli.seed {
        cfg.seeds = seeds.clone();
    }
    if let Some(g) = cli.gamma {
        cfg.gamma = g;
    }
    if let Some(t) = cli.temperature {
        cfg.temperature = t;
    }
    if let Some(a) = cli.alpha {
        cfg.alpha = a;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> BenchResult<()> {
    let cfg = load_config(cli)?;
    let ws = Workspace::new(&cli.out);
    let seed = cfg.seeds[0];
    match &cli.command {
        Command::Config => print!("{cfg}"),
        Command::Synth => {
            let data = cmd_synth(&cfg, seed, &ws)?;
            println!(
                "wrote {} corpora, {} train and {} test queries to {}",
                data.corpora.len(),
                data.train.len(),
                data.test.len(),
                ws.dir.display()
            );
        }
        Command::Fit => {
            let ids = cmd_fit(&cfg, &ws)?;
            println!("fit {}", ids.join(", "));
        }
        Command::Collect => {
            let set = cmd_collect(&cfg, seed, &ws)?;
            println!("wrote {} records (k={}) to {}", set.len(), set.k, ws.dataset().display());
        }
        Command::Train => {
            let p = cmd_train(&cfg, seed, &ws)?;
            println!("wrote policy with {} parameters to {}", p.num_params(), ws.policy().display());
        }
        Command::Decode { query } => {
            for line in cmd_decode(&cfg, seed, &ws, query.as_deref(), cli.mode)? {
                println!("{}", line.to_tsv());
            }
        }
        Command::Bench => emit(&run_bench(&cfg)?.report, &ws, "bench")?,
        Command::SweepAlpha { alphas } => {
            let alphas = alphas.clone().unwrap_or_else(|| cfg.alphas.clone());
            emit(&run_sweep_alpha(&cfg, &alphas)?.report, &ws, "sweep-alpha")?;
        }
        Command::Curve { sizes } => {
            let sizes = sizes.clone().unwrap_or_else(|| cfg.curve_sizes.clone());
            emit(&run_curve(&cfg, &sizes)?.report, &ws, "curve")?;
        }
        Command::Sweep { gammas, temperatures } => {
            let g = gammas.clone().unwrap_or_else(|| cfg.sweep_gammas.clone());
            let t = temperatures.clone().unwrap_or_else(|| cfg.sweep_temperatures.clone());
            emit(&run_decode_sweep(&cfg, &g, &t)?.report, &ws, "sweep")?;
        }
    }
    Ok(())
}

fn emit(report: &specroute::report::BenchReport, ws: &Workspace, stem: &str) -> BenchResult<()> {
    report.write(&ws.dir, stem)?;
    print!("{}", report.to_table());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("specroute: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
