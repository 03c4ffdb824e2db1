//! The file-based workflow behind the `mpdqn` binary: a config file, per-seed
//! training CSVs and checkpoints, evaluation summaries and a small sweep.
//!
//!     cargo run --release --example experiment_harness [out_dir]

use std::path::PathBuf;

use mpdqn::harness::{describe, evaluate, find_checkpoints, sweep, sweep_report, train, RunConfig, SweepSpec};

fn main() -> mpdqn::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("mpdqn-harness-example"));

    let run_dir = root.join("run");
    let cfg = RunConfig::from_text(&format!(
        "# chain task, two seeds
env = chain
algorithm = pdqn-multipass
hidden = 32
batch_size = 32
initial_fill = 32
episodes = 300
eval_episodes = 10
seeds = 0,1
out_dir = {}
",
        run_dir.display()
    ))?;
    for out in train(&cfg)? {
        let last: Vec<f64> = out.records.iter().rev().take(50).map(|r| r.ret).collect();
        println!(
            "seed {}: log {}, last-50 mean return {:.3}",
            out.seed,
            out.log.display(),
            last.iter().sum::<f64>() / last.len() as f64
        );
    }
    let summary = evaluate(&find_checkpoints(&run_dir)?, cfg.eval_episodes, Some(&run_dir))?;
    println!("evaluation: {}", summary.csv_line());

    let sweep_dir = root.join("sweep");
    let spec = SweepSpec::from_text(&format!(
        "env = chain
algorithm = pdqn-multipass
hidden = 32
batch_size = 32
initial_fill = 32
episodes = 200
eval_episodes = 10
seeds = 0,1
out_dir = {}
sweep.lr_q = 1e-3 | 1e-4
sweep.lr_actor = 1e-4 | 1e-3
",
        sweep_dir.display()
    ))?;
    let result = sweep(&spec)?;
    for r in &result.rejected {
        println!("rejected {}: {}", describe(&r.overrides), r.reason);
    }
    for (rank, cell) in sweep_report(&sweep_dir)?.ranked.iter().enumerate() {
        println!(
            "{}. {} mean {:.3}",
            rank + 1,
            describe(&cell.overrides),
            cell.summary.summary.mean
        );
    }
    println!("outputs under {}", root.display());
    Ok(())
}
