use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use meps_core::clips::ClipTable;
use meps_core::harness::{self, ExperimentConfig, RunOptions};
use meps_core::history::{DynamicHypergraph, DEFAULT_KEYFRAME_EVERY};
use rand::SeedableRng;

#[derive(Parser)]
#[command(name = "meps", version, about = "Train and audit many-body projective simulation agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every agent of a config and write its result files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        ensemble: Option<usize>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        /// Abort on any walk longer than its analytic bound.
        #[arg(long)]
        assert_bounds: bool,
    },
    /// Print the static bound reports of a config's agents as JSON.
    Audit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare each bias against its induced standard model on random instances.
    Oracle {
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convert a run's recorded history into a hypergraph interchange file.
    HistoryExport {
        /// An agent directory holding history.jsonl and clips.json.
        run_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, ensemble, rounds, jobs, out, assert_bounds } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(e) = ensemble {
                cfg.ensemble = e;
            }
            if let Some(r) = rounds {
                cfg.rounds = r;
            }
            cfg.assert_bounds |= assert_bounds;
            let dir = out.join(&cfg.name);
            let output = harness::run(&cfg, RunOptions { jobs })?;
            output.write(&dir)?;
            std::fs::write(dir.join("config.json"), cfg.canonical_json()).context("writing config.json")?;
            for agent in &output.agents {
                println!("{}", serde_json::to_string(&agent.summary)?);
            }
            if let Some(bad) = output.agents.iter().find(|a| a.summary.walk_bound.as_ref().is_some_and(|b| !b.satisfied)) {
                bail!("agent {} exceeded its walk-length bound", bad.summary.name);
            }
        }
        Command::Audit { config } => {
            let reports = harness::audit(&ExperimentConfig::load(&config)?)?;
            println!("{}", serde_json::to_string_pretty(&reports)?);
            if reports.iter().any(|r| !r.satisfied) {
                bail!("some bounds are violated");
            }
        }
        Command::Oracle { trials, seed } => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let worst = meps_core::oracle::run_trials(&mut rng, trials)?;
            println!("{}", serde_json::to_string_pretty(&worst)?);
        }
        Command::HistoryExport { run_dir, out } => {
            let history = DynamicHypergraph::import(&run_dir.join("history.jsonl"), DEFAULT_KEYFRAME_EVERY)?;
            let clips_path = run_dir.join("clips.json");
            let clips: ClipTable = serde_json::from_str(
                &std::fs::read_to_string(&clips_path).with_context(|| format!("reading {}", clips_path.display()))?,
            )?;
            let target = out.unwrap_or_else(|| run_dir.join("hypergraph.json"));
            std::fs::write(&target, serde_json::to_vec(&history.to_interchange(&clips)?)?)
                .with_context(|| format!("writing {}", target.display()))?;
            println!("{}", target.display());
        }
    }
    Ok(())
}
