//! `qfs`: simulate noisy qubit ensembles, extract QFS points and identify noise.

mod commands;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "qfs", version, about = "Quantum feature space noise identification")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: hardware parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Floating-point precision. Only double precision is implemented.
    #[arg(long, global = true, value_enum, default_value_t = Precision::Double)]
    precision: Precision,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Precision {
    Double,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Study {
    PulseWidth,
    Interpolation,
    Energy,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate every configured noise model under the configured pulse.
    Simulate,
    /// Identify an unknown cluster by its distance to reference points.
    Classify {
        /// QFS point CSV of the unknown cluster; simulated from the
        /// configuration when omitted.
        #[arg(long)]
        unknown: Option<PathBuf>,
        /// QFS point CSV of the references; simulated when omitted.
        #[arg(long)]
        references: Option<PathBuf>,
        /// Also run the bump-peak refinement search.
        #[arg(long)]
        refine: bool,
    },
    /// Generate a labelled dataset.
    Dataset {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Cross-validate the classifiers on a dataset.
    Train {
        /// Dataset CSV; generated from the configuration when omitted.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Emit QFS points along one of the parameter sweeps.
    Sweep {
        #[arg(value_enum)]
        study: Study,
    },
    /// Time the scan/reduce simulator against the sequential baseline.
    Bench {
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        realisations: Option<usize>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    debug_assert_eq!(cli.precision, Precision::Double);
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let mut cfg = match &cli.config {
        Some(p) => qfs_core::config::RunConfig::load(p)?,
        None => qfs_core::config::RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out_dir = o;
    }
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating output directory {}", cfg.out_dir.display()))?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Classify {
            unknown,
            references,
            refine,
        } => commands::classify(&cfg, unknown.as_deref(), references.as_deref(), refine),
        Command::Dataset { count } => commands::dataset(&cfg, count),
        Command::Train { dataset, folds } => commands::train(&cfg, dataset.as_deref(), folds),
        Command::Sweep { study } => commands::sweep(&cfg, study),
        Command::Bench { steps, realisations } => commands::bench(&cfg, steps, realisations),
    }
}
