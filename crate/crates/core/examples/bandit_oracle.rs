//! Learns the two-action parameterised bandit and the three-state chain with
//! a multi-pass agent, then compares greedy choices and Q-values with the
//! closed-form optimum.
//!
//!     cargo run --release --example bandit_oracle [seed]

use mpdqn::agent::Agent;
use mpdqn::envs::{oracle_q, ChainPamdp, ParamBandit};
use mpdqn::harness::{RunConfig, Session};

const BANDIT: &str = "
env = bandit
algorithm = pdqn-multipass
hidden = 128
episodes = 12000
batch_size = 128
initial_fill = 128
lr_actor = 1e-3
tau_actor = 0.01
ou_sigma = 0.1
";

const CHAIN: &str = "
env = chain
algorithm = pdqn-multipass
hidden = 128
episodes = 8000
batch_size = 128
initial_fill = 128
lr_actor = 1e-3
tau_actor = 0.01
ou_sigma = 0.1
";

fn main() -> mpdqn::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);

    let cfg = RunConfig::from_text(BANDIT)?;
    let mut session = Session::new(&cfg, seed)?;
    let mut steps = 0;
    for _ in 0..cfg.episodes {
        steps += session.train_episode()?.steps;
    }
    let step = session.greedy_trajectory(0)?.remove(0);
    let oracle = oracle_q(&cfg.env, cfg.gamma)?;
    let agent = session.agent().as_pdqn().expect("multi-pass agent");
    let q = agent.q().q_values(&step.state, &step.action.joint)?;
    let k = step.action.action;
    let x = step.action.params[0];
    println!("bandit, {steps} steps");
    println!("  greedy action {k}, parameter {x:.4} (optimum: action 0, parameter 0.3)");
    println!(
        "  Q(s, {k}, x) = {:.4}, Q* = {:.4}",
        q[k],
        oracle.q(&ParamBandit::STATE, k, x)?
    );

    let cfg = RunConfig::from_text(CHAIN)?;
    let mut session = Session::new(&cfg, seed)?;
    let mut steps = 0;
    for _ in 0..cfg.episodes {
        steps += session.train_episode()?.steps;
    }
    let oracle = oracle_q(&cfg.env, cfg.gamma)?;
    let trajectory = session.greedy_trajectory(0)?;
    let discounted: f64 = trajectory
        .iter()
        .enumerate()
        .map(|(t, s)| cfg.gamma.powi(t as i32) * s.reward)
        .sum();
    println!("chain, {steps} steps");
    for s in &trajectory {
        println!(
            "  action {} parameter {:.4} reward {:.4}",
            s.action.action, s.action.params[0], s.reward
        );
    }
    println!(
        "  discounted return {discounted:.4}, V*(s0) = {:.4}, epsilon now {:.3}",
        oracle.v(&ChainPamdp::one_hot(0))?,
        session.agent().epsilon()
    );
    Ok(())
}
