//! Plays the Platform environment with a fixed script that clears both
//! enemies and both gaps, printing the observation after each step.
//!
//!     cargo run --release --example platform_scripted

use mpdqn::envs::{Environment, Platform, PlatformConfig, HOP, LEAP, RUN};

fn main() -> mpdqn::Result<()> {
    let mut env = Platform::new(PlatformConfig::default())?;
    let names = ["run", "hop", "leap"];
    let script = [(HOP, 1.0), (HOP, 0.2), (LEAP, 0.0), (HOP, 0.8), (LEAP, 0.0), (RUN, 1.0)];
    let state = env.reset(0);
    println!("start  x = {:5.1}  features {state:.2?}", env.position());
    let mut total = 0.0;
    for (k, p) in script {
        let step = env.step(k, &[p])?;
        total += step.reward;
        println!(
            "{:<4} {p:.1}  x = {:5.1}  reward {:.3}  enemies {:.1?}{}",
            names[k],
            env.position(),
            step.reward,
            env.enemy_positions(),
            if step.terminal { "  (terminal)" } else { "" }
        );
    }
    println!("return {total:.3}");

    // Running into the first gap ends the episode with no reward.
    env.reset(0);
    env.step(HOP, &[1.0])?;
    let step = env.step(RUN, &[0.8])?;
    println!("hop then long run: reward {} terminal {}", step.reward, step.terminal);
    Ok(())
}
