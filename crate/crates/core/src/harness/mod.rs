//! Experiment driver: seeded training runs, exploration-free evaluation,
//! grid sweeps, CSV logs and summary statistics.
//!
//! Output layout of a training run in `out_dir`:
//!
//! ```text
//! config.json            resolved run config
//! train_seed<s>.csv      seed,episode,return,steps,epsilon,q_loss,actor_loss
//! seed<s>.meta.json      progress record (RunMeta)
//! seed<s>.ckpt           checkpoint (Checkpoint)
//! ```
//!
//! Evaluation adds `eval.csv` (`seed,episode,return,steps`) and
//! `summary.csv` (`algorithm,env,n_seeds,mean,std,stderr`).

mod cli;
mod config;
mod run;
mod session;
mod stats;
mod sweep;

pub use cli::{run as run_cli, Cli, Command};
pub use config::{Algorithm, RunConfig, KEYS};
pub use run::{
    checkpoint_path, evaluate, find_checkpoints, read_eval_csv, read_train_csv, train, train_log_path, train_seed,
    write_eval, EvalSummary, RunMeta, SeedEval, TrainOutput, EVAL_HEADER, SUMMARY_HEADER, TRAIN_HEADER,
};
pub use session::{derive_seed, splitmix64, AnyAgent, Checkpoint, EpisodeRecord, EvalRecord, Session, TrajectoryStep};
pub use stats::{smooth, summarize, Summary};
pub use sweep::{check_constraints, describe, sweep, sweep_report, Cell, CellResult, Rejected, SweepResult, SweepSpec};

use std::path::Path;

use crate::error::{Error, Result};
use crate::qfunction::SweepRow;

/// Loads a P-DQN checkpoint, rolls out its greedy policy, and sweeps one
/// parameter coordinate of `action` over `points` evenly spaced values in
/// `[-1, 1]` at the `state_index`-th visited state, other parameters held
/// at the actor's output. Returns the rows and the number of actions.
pub fn diagnose_sensitivity(
    checkpoint: &Path,
    state_index: usize,
    action: usize,
    coordinate: usize,
    points: usize,
) -> Result<(Vec<SweepRow>, usize)> {
    if points < 2 {
        return Err(Error::InvalidArgument("a sweep needs at least 2 points".into()));
    }
    let mut session = Session::from_checkpoint(Checkpoint::load(checkpoint)?)?;
    let trajectory = session.greedy_trajectory(0)?;
    let step = trajectory.get(state_index).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "state index {state_index} out of range: the greedy trajectory has {} states",
            trajectory.len()
        ))
    })?;
    let agent = session.agent().as_pdqn().ok_or(Error::Unsupported(
        "sensitivity sweeps need per-action Q-values (a pdqn checkpoint)",
    ))?;
    let grid: Vec<f64> = (0..points)
        .map(|i| (-1.0 + 2.0 * i as f64 / (points - 1) as f64).clamp(-1.0, 1.0))
        .collect();
    let rows = agent
        .q()
        .sensitivity_sweep(&step.state, &step.action.joint, action, coordinate, &grid)?;
    Ok((rows, agent.q().space().num_actions()))
}
