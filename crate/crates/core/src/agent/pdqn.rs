use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, mix_with_stored, Agent, BootstrapTarget, ParameterisedAction, UpdateStats};
use crate::error::{ensure_dim, Error, Result};
use crate::nn::{clip_grad_norm, polyak_update, Activation, Adam, Matrix};
use crate::policy::{invert_gradients, Actor, EpsilonSchedule, OuNoise, Passthrough};
use crate::qfunction::{ActionSpace, QFunction, QVariant};
use crate::replay::{ReplayBuffer, Transition};

/// Hyperparameters shared by P-DQN, SP-DQN and MP-DQN.
///
/// The defaults are the Platform settings: one hidden layer of 128 units,
/// `α_Q = 1e-3`, `α_x = 1e-4`, `τ_Q = 0.1`, `τ_x = 0.001`, `B = 128`,
/// gradient norm clipped at 10 and `γ = 0.9`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdqnConfig {
    pub variant: QVariant,
    pub gamma: f64,
    pub batch_size: usize,
    pub lr_q: f64,
    pub lr_actor: f64,
    pub tau_q: f64,
    pub tau_actor: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub clip_norm: f64,
    /// Mixing ratio between one-step and Monte Carlo targets; 0 disables.
    pub beta: f64,
    /// Replay size required before the first update.
    pub initial_fill: usize,
    pub invert_gradients: bool,
    pub epsilon: EpsilonSchedule,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub ou_mu: f64,
}

impl Default for PdqnConfig {
    fn default() -> Self {
        Self {
            variant: QVariant::MultiPass,
            gamma: 0.9,
            batch_size: 128,
            lr_q: 1e-3,
            lr_actor: 1e-4,
            tau_q: 0.1,
            tau_actor: 0.001,
            hidden: vec![128],
            activation: Activation::Relu,
            clip_norm: 10.0,
            beta: 0.0,
            initial_fill: 128,
            invert_gradients: true,
            epsilon: EpsilonSchedule::for_budget(80_000),
            ou_theta: OuNoise::DEFAULT_THETA,
            ou_sigma: OuNoise::DEFAULT_SIGMA,
            ou_mu: 0.0,
        }
    }
}

impl PdqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        for (name, tau) in [("tau_q", self.tau_q), ("tau_actor", self.tau_actor)] {
            if !(tau > 0.0 && tau <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {tau}"));
            }
        }
        for (name, lr) in [("lr_q", self.lr_q), ("lr_actor", self.lr_actor)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(format!("{name} must be positive, got {lr}"));
            }
        }
        if !(self.clip_norm > 0.0) {
            return bad(format!("clip_norm must be positive, got {}", self.clip_norm));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        Ok(())
    }
}

/// P-DQN-style agent: a Q-function for discrete selection plus a
/// deterministic actor for all action-parameters, each with a Polyak-averaged
/// target copy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdqnAgent {
    config: PdqnConfig,
    space: ActionSpace,
    q: QFunction,
    q_target: QFunction,
    actor: Actor,
    actor_target: Actor,
    q_optimizer: Adam,
    actor_optimizer: Adam,
    epsilon: EpsilonSchedule,
    noise: OuNoise,
}

impl PdqnAgent {
    pub fn new<R: Rng + ?Sized>(
        space: ActionSpace,
        config: PdqnConfig,
        passthrough: Option<Passthrough>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let q = QFunction::new(space.clone(), config.variant, &config.hidden, config.activation, rng)?;
        let actor = Actor::new(
            space.state_dim(),
            &config.hidden,
            space.bounds().to_vec(),
            config.activation,
            passthrough,
            rng,
        )?;
        Self::from_parts(space, config, q, actor)
    }

    /// Builds an agent around given online networks; targets start as copies.
    pub fn from_parts(space: ActionSpace, config: PdqnConfig, q: QFunction, actor: Actor) -> Result<Self> {
        config.validate()?;
        if q.space() != &space || q.variant() != config.variant {
            return Err(Error::InvalidArgument(
                "Q-function does not match the agent's action space or variant".into(),
            ));
        }
        ensure_dim("actor state", space.state_dim(), actor.state_dim())?;
        ensure_dim("actor output", space.joint_dim(), actor.output_dim())?;
        let q_optimizer = Adam::new(q.nets(), config.lr_q)?;
        let actor_optimizer = Adam::new(actor.nets(), config.lr_actor)?;
        let noise = OuNoise::new(space.joint_dim(), config.ou_theta, config.ou_sigma, config.ou_mu, 1.0)?;
        Ok(Self {
            epsilon: config.epsilon.clone(),
            q_target: q.clone(),
            actor_target: actor.clone(),
            q,
            actor,
            q_optimizer,
            actor_optimizer,
            noise,
            space,
            config,
        })
    }

    pub fn config(&self) -> &PdqnConfig {
        &self.config
    }

    pub fn q(&self) -> &QFunction {
        &self.q
    }

    pub fn q_mut(&mut self) -> &mut QFunction {
        &mut self.q
    }

    pub fn q_target(&self) -> &QFunction {
        &self.q_target
    }

    pub fn actor(&self) -> &Actor {
        &self.actor
    }

    pub fn actor_mut(&mut self) -> &mut Actor {
        &mut self.actor
    }

    pub fn actor_target(&self) -> &Actor {
        &self.actor_target
    }

    pub fn noise(&self) -> &OuNoise {
        &self.noise
    }

    pub fn set_epsilon(&mut self, schedule: EpsilonSchedule) {
        self.epsilon = schedule;
    }

    /// Bootstrapped target for a single transition.
    pub fn q_target_value(&self, reward: f64, next_state: &[f64], terminal: bool) -> Result<f64> {
        ensure_dim("next state", self.space.state_dim(), next_state.len())?;
        if terminal {
            return Ok(reward);
        }
        let x = self.actor_target.forward(next_state)?;
        let q = self.q_target.q_values(next_state, &x)?;
        Ok(reward + self.config.gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Minimises `½(y − Q(s, k, x))²` over the batch, where only the executed
    /// action's head sees the error. Returns the pre-update loss.
    pub fn q_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InsufficientSamples { have: 0, need: 1 });
        }
        let one_step = self.one_step_targets(batch)?;
        let targets: Vec<f64> = one_step
            .iter()
            .zip(batch)
            .map(|(&y, t)| mix_with_stored(y, t, self.config.beta))
            .collect();
        let states = Matrix::from_rows(&batch.iter().map(|t| t.state.as_slice()).collect::<Vec<_>>())?;
        let xs = Matrix::from_rows(&batch.iter().map(|t| t.params.as_slice()).collect::<Vec<_>>())?;
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();

        let pass = self.q.forward_executed(&states, &actions, &xs)?;
        let predicted = pass.values();
        let n = batch.len() as f64;
        let mut upstream = Matrix::zeros(batch.len(), 1);
        let mut loss = 0.0;
        for (b, &y) in targets.iter().enumerate() {
            let residual = predicted[(b, 0)] - y;
            loss += 0.5 * residual * residual;
            upstream[(b, 0)] = residual / n;
        }
        let (mut grads, _) = pass.backward(&self.q, &upstream)?;
        drop(pass);
        clip_grad_norm(&mut grads, self.config.clip_norm)?;
        self.q_optimizer.step(self.q.nets_mut(), &grads)?;
        Ok(loss / n)
    }

    /// `∇_x Σ_k Q(s, k, x)` at `x = actor(s)`, one row per state. For the
    /// joint variant every block collects gradients from every Q-value; for
    /// multi-pass and separate networks block `k` only sees `∂Q_k/∂x_k`.
    pub fn action_param_gradients(&self, states: &Matrix) -> Result<Matrix> {
        let xs = self.actor.predict_batch(states)?;
        let pass = self.q.forward_all(states, &xs)?;
        let ones = Matrix::filled(states.rows(), self.space.num_actions(), 1.0);
        Ok(pass.backward(&self.q, &ones)?.1)
    }

    /// Ascends `Σ_k Q(s, k, x(s))` w.r.t. the actor only. Returns the
    /// pre-update loss `−mean Σ_k Q`.
    pub fn actor_update(&mut self, states: &Matrix) -> Result<f64> {
        if states.rows() == 0 {
            return Err(Error::InsufficientSamples { have: 0, need: 1 });
        }
        let (xs, cache) = self.actor.forward_batch(states)?;
        let pass = self.q.forward_all(states, &xs)?;
        let q = pass.values();
        let n = states.rows() as f64;
        let loss = -q.as_slice().iter().sum::<f64>() / n;
        let ones = Matrix::filled(states.rows(), self.space.num_actions(), 1.0);
        let (_, dq_dx) = pass.backward(&self.q, &ones)?;

        let mut upstream = Matrix::zeros(states.rows(), self.space.joint_dim());
        for b in 0..states.rows() {
            let g = if self.config.invert_gradients {
                invert_gradients(dq_dx.row(b), xs.row(b), self.space.bounds())?
            } else {
                dq_dx.row(b).to_vec()
            };
            upstream.row_mut(b).iter_mut().zip(g).for_each(|(u, g)| *u = -g / n);
        }
        let grads = self.actor.backward(&cache, &upstream)?;
        let mut grads = vec![grads];
        clip_grad_norm(&mut grads, self.config.clip_norm)?;
        self.actor_optimizer.step(self.actor.nets_mut(), &grads)?;
        Ok(loss)
    }

    /// Soft-updates both target networks.
    pub fn sync_targets(&mut self) -> Result<()> {
        polyak_update(self.q_target.nets_mut(), self.q.nets(), self.config.tau_q)?;
        polyak_update(self.actor_target.nets_mut(), self.actor.nets(), self.config.tau_actor)
    }
}

impl BootstrapTarget for PdqnAgent {
    fn gamma(&self) -> f64 {
        self.config.gamma
    }

    fn one_step_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        let live: Vec<&Transition> = batch.iter().copied().filter(|t| !t.terminal).collect();
        let mut next_values = Vec::new();
        if !live.is_empty() {
            let next = Matrix::from_rows(&live.iter().map(|t| t.next_state.as_slice()).collect::<Vec<_>>())?;
            let xs = self.actor_target.predict_batch(&next)?;
            let q = self.q_target.evaluate(&next, &xs)?;
            next_values = q
                .row_iter()
                .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect();
        }
        let mut live_values = next_values.into_iter();
        Ok(batch
            .iter()
            .map(|t| {
                if t.terminal {
                    t.reward
                } else {
                    t.reward + self.config.gamma * live_values.next().expect("one value per live transition")
                }
            })
            .collect())
    }
}

impl Agent for PdqnAgent {
    fn action_space(&self) -> &ActionSpace {
        &self.space
    }

    fn begin_episode(&mut self, episode: u64) {
        self.epsilon.step(episode);
        self.noise.reset();
    }

    fn epsilon(&self) -> f64 {
        self.epsilon.current()
    }

    fn mixing_ratio(&self) -> f64 {
        self.config.beta
    }

    /// With `explore`, OU noise is added to every parameter slot and the
    /// discrete action is uniform with probability ε. Without it, the choice
    /// is the greedy argmax with ties broken towards the lowest index.
    fn select_action<R: Rng + ?Sized>(
        &mut self,
        state: &[f64],
        explore: bool,
        rng: &mut R,
    ) -> Result<ParameterisedAction> {
        let mut x = self.actor.forward(state)?;
        if explore {
            let noise = self.noise.sample(rng);
            x.iter_mut().zip(noise).for_each(|(v, n)| *v += n);
            self.space.clamp(&mut x);
        }
        let k = if explore && rng.random::<f64>() < self.epsilon.current() {
            rng.random_range(0..self.space.num_actions())
        } else {
            argmax(&self.q.q_values(state, &x)?)
        };
        Ok(ParameterisedAction::from_joint(&self.space, k, x))
    }

    fn update<R: Rng + ?Sized>(&mut self, replay: &ReplayBuffer, rng: &mut R) -> Result<Option<UpdateStats>> {
        if replay.len() < self.config.initial_fill.max(self.config.batch_size) {
            return Ok(None);
        }
        let batch = replay.sample(self.config.batch_size, rng)?;
        let q_loss = self.q_update(&batch)?;
        let states = Matrix::from_rows(&batch.iter().map(|t| t.state.as_slice()).collect::<Vec<_>>())?;
        let actor_loss = self.actor_update(&states)?;
        self.sync_targets()?;
        Ok(Some(UpdateStats { q_loss, actor_loss }))
    }
}
