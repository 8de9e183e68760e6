//! `siglab`: validate experiment files, run simulation grids and print the
//! asymptotic oracle sets of a graph.
//!
//! Every flag can also be set through an environment variable with the
//! `SIGLAB_` prefix (`SIGLAB_CONFIG`, `SIGLAB_OUT`, `SIGLAB_WORKERS`,
//! `SIGLAB_SEED`, `SIGLAB_SCENARIO`, `SIGLAB_QUIET`).
//!
//! Exit status: 0 success, 1 runtime failure, 2 configuration error.

mod config;
mod oracle;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use siglab::graph::CausalGraph;
use siglab::scenarios::{build_graph, split_seed, StreamPurpose};

use config::ExperimentConfig;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "siglab",
    version,
    about = "Screening vs. no-screening signature simulations"
)]
struct Cli {
    /// Only report warnings and errors.
    #[arg(long, short, global = true, env = "SIGLAB_QUIET")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment file (TOML).
    #[arg(long, short, env = "SIGLAB_CONFIG")]
    config: PathBuf,
    /// Keep only scenarios whose name or kind matches.
    #[arg(long, env = "SIGLAB_SCENARIO")]
    scenario: Option<String>,
    /// Master seed for every scenario, replacing the file's seeds.
    #[arg(long, env = "SIGLAB_SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check an experiment file without running it.
    Validate {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run every scenario and write CSV outputs plus a manifest.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory.
        #[arg(long, short, env = "SIGLAB_OUT")]
        out: PathBuf,
        /// Worker threads for replicas; 0 uses one per core.
        #[arg(long, short, env = "SIGLAB_WORKERS", default_value_t = 0)]
        workers: usize,
    },
    /// Print children, descendants and asymptotic selected sets as JSON.
    Oracle {
        /// Graph JSON file.
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        graph: Option<PathBuf>,
        /// Experiment file; the graph of the first (filtered) scenario is used.
        #[arg(long, short, env = "SIGLAB_CONFIG")]
        config: Option<PathBuf>,
        #[arg(long, env = "SIGLAB_SCENARIO")]
        scenario: Option<String>,
        #[arg(long, env = "SIGLAB_SEED")]
        seed: Option<u64>,
        /// Write the report here instead of stdout.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn load(
    path: &Path,
    scenario: Option<&str>,
    seed: Option<u64>,
) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path).map_err(|e| Failure::Config(e.to_string()))?;
    for w in &cfg.warnings {
        log::warn!("{w}");
    }
    if let Some(seed) = seed {
        cfg.override_seed(seed);
    }
    if let Some(filter) = scenario {
        cfg.retain_scenario(filter);
        if cfg.scenarios.is_empty() {
            return Err(Failure::Config(format!("no scenario matches `{filter}`")));
        }
    }
    let problems = cfg.validate();
    if !problems.is_empty() {
        return Err(Failure::Config(problems.join("\n")));
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { cfg } => {
            let c = load(&cfg.config, cfg.scenario.as_deref(), cfg.seed)?;
            let replicas: usize = c.scenarios.iter().map(|s| s.replicas).sum();
            println!(
                "OK: {} grid point(s), {replicas} replica(s)",
                c.scenarios.len()
            );
            Ok(())
        }
        Command::Run { cfg, out, workers } => {
            let c = load(&cfg.config, cfg.scenario.as_deref(), cfg.seed)?;
            let manifest = run::cmd_run(&c, &cfg.config, &out, workers)?;
            for f in &manifest.failures {
                log::warn!("{} replica {}: {}", f.scenario, f.replica, f.error);
            }
            if manifest.total_failure {
                return Err(Failure::Runtime(anyhow::anyhow!("every replica failed")));
            }
            log::info!("wrote {}", out.join(run::MANIFEST_FILE).display());
            Ok(())
        }
        Command::Oracle {
            graph,
            config,
            scenario,
            seed,
            output,
        } => {
            let g = match (graph, config) {
                (Some(path), _) => CausalGraph::from_json_path(&path)
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?,
                (None, Some(path)) => {
                    let c = load(&path, scenario.as_deref(), seed)?;
                    let s = &c.scenarios[0];
                    let graph_seed = split_seed(s.master_seed, s.kind, 0, StreamPurpose::Graph);
                    build_graph(s, graph_seed).map_err(|e| Failure::Config(e.to_string()))?
                }
                (None, None) => unreachable!("clap requires --graph or --config"),
            };
            let text = serde_json::to_string_pretty(&oracle::oracle_report(&g))
                .context("serializing oracle report")?;
            match output {
                Some(path) => std::fs::write(&path, text + "\n")
                    .with_context(|| format!("writing {}", path.display()))?,
                None => println!("{text}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
