use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::config::RunConfig;
use super::diagnose_sensitivity;
use super::run::{evaluate, find_checkpoints, train, SUMMARY_HEADER};
use super::sweep::{describe, sweep, sweep_report, SweepResult, SweepSpec};
use crate::error::{Error, Result};
use crate::qfunction::write_sweep_csv;

#[derive(Debug, Parser)]
#[command(
    name = "mpdqn",
    version,
    about = "Train and evaluate agents over parameterised action spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one agent per seed, writing logs and checkpoints.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint, or every checkpoint in a directory, greedily.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1000)]
        episodes: u64,
        /// Where to write eval.csv and summary.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a hyperparameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-rank a finished sweep from its raw evaluation logs.
    SweepReport {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Q-values as one action-parameter sweeps across its range, at a state
    /// from the checkpoint's greedy trajectory.
    DiagnoseSensitivity {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Step of the greedy trajectory whose state is used.
        #[arg(long)]
        state_index: usize,
        /// Zero-based action whose parameter is swept.
        #[arg(long)]
        action: usize,
        #[arg(long, default_value_t = 0)]
        coordinate: usize,
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_ranking(result: &SweepResult, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "rank  mean      std       stderr    cell  overrides")?;
    for (rank, c) in result.ranked.iter().enumerate() {
        let s = &c.summary.summary;
        writeln!(
            out,
            "{:<5} {:<9.4} {:<9.4} {:<9.4} {:<5} {}",
            rank + 1,
            s.mean,
            s.std,
            s.stderr,
            c.index,
            describe(&c.overrides)
        )?;
    }
    for r in &result.rejected {
        writeln!(out, "rejected {}: {}", describe(&r.overrides), r.reason)?;
    }
    Ok(())
}

pub fn run(cli: Cli, out: &mut impl Write) -> Result<()> {
    let io = |e| Error::io("<stdout>", e);
    match cli.command {
        Command::Train {
            config,
            seeds,
            out: dir,
        } => {
            let mut cfg = RunConfig::from_file(&config)?;
            if let Some(seeds) = seeds {
                cfg.seeds = seeds;
            }
            if let Some(dir) = dir {
                cfg.out_dir = dir;
            }
            cfg.validate()?;
            for t in train(&cfg)? {
                let tail = t.records.iter().rev().take(100).map(|r| r.ret).collect::<Vec<_>>();
                let mean = if tail.is_empty() {
                    0.0
                } else {
                    tail.iter().sum::<f64>() / tail.len() as f64
                };
                writeln!(
                    out,
                    "seed {}: {} episodes, last-100 mean return {mean:.4}, checkpoint {}",
                    t.seed,
                    t.records.len(),
                    t.checkpoint.display()
                )
                .map_err(io)?;
            }
        }
        Command::Eval {
            checkpoint,
            episodes,
            out: dir,
        } => {
            let paths = if checkpoint.is_dir() {
                find_checkpoints(&checkpoint)?
            } else {
                vec![checkpoint]
            };
            let summary = evaluate(&paths, episodes, dir.as_deref())?;
            for s in &summary.per_seed {
                writeln!(
                    out,
                    "seed {}: mean return {} over {} episodes",
                    s.seed, s.mean_return, s.episodes
                )
                .map_err(io)?;
            }
            writeln!(out, "{SUMMARY_HEADER}\n{}", summary.csv_line()).map_err(io)?;
        }
        Command::Sweep { config } => {
            let result = sweep(&SweepSpec::from_file(&config)?)?;
            print_ranking(&result, out).map_err(io)?;
        }
        Command::SweepReport { dir } => {
            let result = sweep_report(&dir)?;
            print_ranking(&result, out).map_err(io)?;
        }
        Command::DiagnoseSensitivity {
            checkpoint,
            state_index,
            action,
            coordinate,
            points,
            out: dest,
        } => {
            let (rows, k) = diagnose_sensitivity(&checkpoint, state_index, action, coordinate, points)?;
            match dest {
                Some(path) => {
                    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                    write_sweep_csv(&rows, k, std::io::BufWriter::new(file)).map_err(|e| Error::io(&path, e))?;
                }
                None => write_sweep_csv(&rows, k, &mut *out).map_err(io)?,
            }
        }
    }
    Ok(())
}
