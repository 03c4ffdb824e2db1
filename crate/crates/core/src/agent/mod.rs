//! Learning agents over parameterised action spaces.
//!
//! [`PdqnAgent`] covers the P-DQN family: the same actor/critic update rule
//! over a joint, multi-pass or separate-network Q-function. [`PaddpgAgent`]
//! is the relaxed-action DDPG baseline.

mod paddpg;
mod pdqn;

pub use paddpg::{PaddpgAgent, PaddpgConfig};
pub use pdqn::{PdqnAgent, PdqnConfig};

use rand::Rng;

use crate::error::{Error, Result};
use crate::qfunction::ActionSpace;
use crate::replay::{ReplayBuffer, Transition};

/// A discrete action with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterisedAction {
    /// Zero-based discrete action index.
    pub action: usize,
    /// The chosen action's own parameter block `x_k`.
    pub params: Vec<f64>,
    /// Full joint parameter vector the policy emitted.
    pub joint: Vec<f64>,
    /// Discrete-selection values `f_1..f_K` for the relaxed baseline; empty
    /// for the P-DQN family.
    pub scores: Vec<f64>,
}

impl ParameterisedAction {
    pub(crate) fn from_joint(space: &ActionSpace, action: usize, joint: Vec<f64>) -> Self {
        Self {
            action,
            params: space.block(&joint, action).to_vec(),
            joint,
            scores: Vec::new(),
        }
    }
}

/// Losses from one learning step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub q_loss: f64,
    pub actor_loss: f64,
}

/// Anything that can produce bootstrapped one-step targets from its target
/// networks.
pub trait BootstrapTarget {
    fn gamma(&self) -> f64;

    /// `y = r` for terminal transitions, else `r + γ·V_target(s')`.
    fn one_step_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>>;
}

/// Common act/learn surface used by the experiment harness.
pub trait Agent: BootstrapTarget {
    fn action_space(&self) -> &ActionSpace;

    /// Anneals ε for `episode` and resets the exploration noise.
    fn begin_episode(&mut self, episode: u64);

    fn epsilon(&self) -> f64;

    fn mixing_ratio(&self) -> f64;

    fn select_action<R: Rng + ?Sized>(
        &mut self,
        state: &[f64],
        explore: bool,
        rng: &mut R,
    ) -> Result<ParameterisedAction>;

    /// One gradient step on a fresh minibatch, or `None` while the buffer is
    /// still below the initial-fill threshold.
    fn update<R: Rng + ?Sized>(&mut self, replay: &ReplayBuffer, rng: &mut R) -> Result<Option<UpdateStats>>;
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `G_t = Σ_i γ^i r_{t+i}` for every step of an episode.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (i, r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[i] = acc;
    }
    out
}

/// `(1 − β)·one_step + β·G_t` per transition of a complete episode.
pub fn nstep_mixed_targets(one_step: &[f64], rewards: &[f64], gamma: f64, beta: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("mixing ratio {beta} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("discount {gamma} outside [0, 1]")));
    }
    crate::error::ensure_dim("nstep_mixed_targets", rewards.len(), one_step.len())?;
    Ok(one_step
        .iter()
        .zip(discounted_returns(rewards, gamma))
        .map(|(y, g)| (1.0 - beta) * y + beta * g)
        .collect())
}

/// Target used for a replayed transition: the fresh one-step target, mixed
/// with the stored Monte Carlo return when one is present.
pub(crate) fn mix_with_stored(one_step: f64, t: &Transition, beta: f64) -> f64 {
    match t.mc_return {
        Some(g) if beta > 0.0 => (1.0 - beta) * one_step + beta * g,
        _ => one_step,
    }
}
