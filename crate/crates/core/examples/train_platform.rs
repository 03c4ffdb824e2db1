//! Trains MP-DQN, P-DQN (joint) and PADDPG on Platform with the default
//! hyperparameters, then evaluates each without exploration.
//!
//!     cargo run --release --example train_platform [episodes] [seed]

use mpdqn::harness::{smooth, RunConfig, Session};

fn main() -> mpdqn::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    for algorithm in ["pdqn-multipass", "pdqn-joint", "paddpg"] {
        let cfg = RunConfig::from_text(&format!(
            "env = platform\nalgorithm = {algorithm}\nepisodes = {episodes}"
        ))?;
        let mut session = Session::new(&cfg, seed)?;
        let mut returns = Vec::new();
        for _ in 0..episodes {
            returns.push(session.train_episode()?.ret);
        }
        let curve = smooth(&returns, 100)?;
        let marks: Vec<String> = (1..=4)
            .map(|q| {
                let i = (episodes as usize * q / 4).max(1) - 1;
                format!("{}:{:.2}", i + 1, curve[i])
            })
            .collect();
        let eval: f64 = (0..100)
            .map(|e| session.eval_episode(e).map(|r| r.ret))
            .sum::<mpdqn::Result<f64>>()?
            / 100.0;
        println!(
            "{algorithm:<15} training (100-episode average) {}  evaluation {eval:.3}",
            marks.join(" ")
        );
    }
    Ok(())
}
