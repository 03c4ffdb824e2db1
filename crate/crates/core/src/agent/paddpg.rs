use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, mix_with_stored, Agent, BootstrapTarget, ParameterisedAction, UpdateStats};
use crate::error::{ensure_dim, Error, Result};
use crate::nn::{clip_grad_norm, polyak_update, Activation, Adam, DenseNet, Matrix};
use crate::policy::{invert_gradients, Actor, EpsilonSchedule, OuNoise, Passthrough};
use crate::qfunction::ActionSpace;
use crate::replay::{ReplayBuffer, Transition};

/// Hyperparameters for the relaxed-action DDPG baseline. Defaults are the
/// Platform settings: hidden `(256, 128)`, `α_Q = 1e-3`, `α_μ = 1e-4`,
/// `τ_Q = τ_μ = 0.01`, `B = 32`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaddpgConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub lr_critic: f64,
    pub lr_actor: f64,
    pub tau_critic: f64,
    pub tau_actor: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub clip_norm: f64,
    pub beta: f64,
    pub initial_fill: usize,
    pub invert_gradients: bool,
    pub epsilon: EpsilonSchedule,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub ou_mu: f64,
}

impl Default for PaddpgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            batch_size: 32,
            lr_critic: 1e-3,
            lr_actor: 1e-4,
            tau_critic: 0.01,
            tau_actor: 0.01,
            hidden: vec![256, 128],
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

impl PaddpgConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        for (name, tau) in [("tau_critic", self.tau_critic), ("tau_actor", self.tau_actor)] {
            if !(tau > 0.0 && tau <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {tau}"));
            }
        }
        for (name, lr) in [("lr_critic", self.lr_critic), ("lr_actor", self.lr_actor)] {
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

/// DDPG over the relaxed action vector `(f_1..f_K, x_1..x_K)`, all in
/// `[-1, 1]`, with a scalar critic `Q(s, f, x)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PaddpgAgent {
    config: PaddpgConfig,
    space: ActionSpace,
    critic: DenseNet,
    critic_target: DenseNet,
    actor: Actor,
    actor_target: Actor,
    critic_optimizer: Adam,
    actor_optimizer: Adam,
    epsilon: EpsilonSchedule,
    noise: OuNoise,
}

impl PaddpgAgent {
    /// `passthrough`, if given, maps states to the `M` action-parameters; the
    /// `K` selection outputs get a zero passthrough.
    pub fn new<R: Rng + ?Sized>(
        space: ActionSpace,
        config: PaddpgConfig,
        passthrough: Option<Passthrough>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let sd = space.state_dim();
        let k = space.num_actions();
        let width = k + space.joint_dim();
        let critic = DenseNet::new(sd + width, &config.hidden, 1, config.activation, rng)?;
        let passthrough = passthrough
            .map(|p| {
                ensure_dim("PADDPG passthrough", space.joint_dim(), p.bias().len())?;
                let zeros = Matrix::zeros(sd, k);
                let weights = zeros.hcat(p.weights())?;
                let bias = vec![0.0; k].into_iter().chain(p.bias().iter().copied()).collect();
                Passthrough::new(weights, bias)
            })
            .transpose()?;
        let actor = Actor::new(
            sd,
            &config.hidden,
            Self::relaxed_bounds(&space),
            config.activation,
            passthrough,
            rng,
        )?;
        Self::from_parts(space, config, critic, actor)
    }

    fn relaxed_bounds(space: &ActionSpace) -> Vec<(f64, f64)> {
        std::iter::repeat_n((-1.0, 1.0), space.num_actions())
            .chain(space.bounds().iter().copied())
            .collect()
    }

    pub fn from_parts(space: ActionSpace, config: PaddpgConfig, critic: DenseNet, actor: Actor) -> Result<Self> {
        config.validate()?;
        let width = space.num_actions() + space.joint_dim();
        ensure_dim("critic input", space.state_dim() + width, critic.input_dim())?;
        ensure_dim("critic output", 1, critic.output_dim())?;
        ensure_dim("actor state", space.state_dim(), actor.state_dim())?;
        ensure_dim("actor output", width, actor.output_dim())?;
        let critic_optimizer = Adam::new(std::slice::from_ref(&critic), config.lr_critic)?;
        let actor_optimizer = Adam::new(actor.nets(), config.lr_actor)?;
        let noise = OuNoise::new(width, config.ou_theta, config.ou_sigma, config.ou_mu, 1.0)?;
        Ok(Self {
            epsilon: config.epsilon.clone(),
            critic_target: critic.clone(),
            actor_target: actor.clone(),
            critic,
            actor,
            critic_optimizer,
            actor_optimizer,
            noise,
            space,
            config,
        })
    }

    pub fn config(&self) -> &PaddpgConfig {
        &self.config
    }

    pub fn critic(&self) -> &DenseNet {
        &self.critic
    }

    pub fn actor(&self) -> &Actor {
        &self.actor
    }

    pub fn set_epsilon(&mut self, schedule: EpsilonSchedule) {
        self.epsilon = schedule;
    }

    fn critic_inputs(states: &Matrix, actions: &Matrix) -> Result<Matrix> {
        states.hcat(actions)
    }

    /// Critic regression towards `r + γ·Q'(s', μ'(s'))` on the executed
    /// relaxed action, then one actor step up the critic. Returns
    /// `(critic loss, actor loss)`, both measured before the step.
    pub fn paddpg_update(&mut self, batch: &[&Transition]) -> Result<(f64, f64)> {
        if batch.is_empty() {
            return Err(Error::InsufficientSamples { have: 0, need: 1 });
        }
        let k = self.space.num_actions();
        if let Some(t) = batch.iter().find(|t| t.scores.len() != k) {
            return Err(Error::InvalidArgument(format!(
                "transition carries {} selection scores, expected {k}",
                t.scores.len()
            )));
        }
        let n = batch.len() as f64;
        let one_step = self.one_step_targets(batch)?;
        let targets: Vec<f64> = one_step
            .iter()
            .zip(batch)
            .map(|(&y, t)| mix_with_stored(y, t, self.config.beta))
            .collect();
        let states = Matrix::from_rows(&batch.iter().map(|t| t.state.as_slice()).collect::<Vec<_>>())?;
        let executed: Vec<Vec<f64>> = batch
            .iter()
            .map(|t| t.scores.iter().chain(&t.params).copied().collect())
            .collect();
        let executed = Matrix::from_rows(&executed)?;

        let (predicted, cache) = self.critic.forward(&Self::critic_inputs(&states, &executed)?)?;
        let mut upstream = Matrix::zeros(batch.len(), 1);
        let mut critic_loss = 0.0;
        for (b, &y) in targets.iter().enumerate() {
            let residual = predicted[(b, 0)] - y;
            critic_loss += 0.5 * residual * residual;
            upstream[(b, 0)] = residual / n;
        }
        let (grads, _) = self.critic.backward(&cache, &upstream)?;
        let mut grads = vec![grads];
        clip_grad_norm(&mut grads, self.config.clip_norm)?;
        self.critic_optimizer
            .step(std::slice::from_mut(&mut self.critic), &grads)?;

        let actor_loss = self.actor_step(&states)?;
        Ok((critic_loss / n, actor_loss))
    }

    fn actor_step(&mut self, states: &Matrix) -> Result<f64> {
        let n = states.rows() as f64;
        let sd = self.space.state_dim();
        let (actions, actor_cache) = self.actor.forward_batch(states)?;
        let (q, cache) = self.critic.forward(&Self::critic_inputs(states, &actions)?)?;
        let loss = -q.as_slice().iter().sum::<f64>() / n;
        let (_, input_grads) = self.critic.backward(&cache, &Matrix::filled(states.rows(), 1, 1.0))?;
        let dq_da = input_grads.columns(sd, input_grads.cols());
        let mut upstream = Matrix::zeros(states.rows(), actions.cols());
        for b in 0..states.rows() {
            let g = if self.config.invert_gradients {
                invert_gradients(dq_da.row(b), actions.row(b), self.actor.bounds())?
            } else {
                dq_da.row(b).to_vec()
            };
            upstream.row_mut(b).iter_mut().zip(g).for_each(|(u, g)| *u = -g / n);
        }
        let mut grads = vec![self.actor.backward(&actor_cache, &upstream)?];
        clip_grad_norm(&mut grads, self.config.clip_norm)?;
        self.actor_optimizer.step(self.actor.nets_mut(), &grads)?;
        Ok(loss)
    }

    pub fn sync_targets(&mut self) -> Result<()> {
        polyak_update(
            std::slice::from_mut(&mut self.critic_target),
            std::slice::from_ref(&self.critic),
            self.config.tau_critic,
        )?;
        polyak_update(self.actor_target.nets_mut(), self.actor.nets(), self.config.tau_actor)
    }
}

impl BootstrapTarget for PaddpgAgent {
    fn gamma(&self) -> f64 {
        self.config.gamma
    }

    fn one_step_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        let live: Vec<&Transition> = batch.iter().copied().filter(|t| !t.terminal).collect();
        let mut next_values = Vec::new();
        if !live.is_empty() {
            let next = Matrix::from_rows(&live.iter().map(|t| t.next_state.as_slice()).collect::<Vec<_>>())?;
            let actions = self.actor_target.predict_batch(&next)?;
            next_values = self
                .critic_target
                .predict(&Self::critic_inputs(&next, &actions)?)?
                .into_vec();
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

impl Agent for PaddpgAgent {
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

    /// Greedy: `k = argmax f`. Exploring: OU noise on the whole relaxed
    /// vector, and with probability ε the selection values are redrawn
    /// uniformly from `[-1, 1]` so the stored `f` still names the executed
    /// action.
    fn select_action<R: Rng + ?Sized>(
        &mut self,
        state: &[f64],
        explore: bool,
        rng: &mut R,
    ) -> Result<ParameterisedAction> {
        let k_count = self.space.num_actions();
        let mut relaxed = self.actor.forward(state)?;
        if explore {
            let noise = self.noise.sample(rng);
            relaxed
                .iter_mut()
                .zip(noise)
                .zip(self.actor.bounds())
                .for_each(|((v, n), (lo, hi))| *v = (*v + n).clamp(*lo, *hi));
            if rng.random::<f64>() < self.epsilon.current() {
                for f in &mut relaxed[..k_count] {
                    *f = rng.random_range(-1.0..=1.0);
                }
            }
        }
        let scores = relaxed[..k_count].to_vec();
        let joint = relaxed[k_count..].to_vec();
        let mut action = ParameterisedAction::from_joint(&self.space, argmax(&scores), joint);
        action.scores = scores;
        Ok(action)
    }

    fn update<R: Rng + ?Sized>(&mut self, replay: &ReplayBuffer, rng: &mut R) -> Result<Option<UpdateStats>> {
        if replay.len() < self.config.initial_fill.max(self.config.batch_size) {
            return Ok(None);
        }
        let batch = replay.sample(self.config.batch_size, rng)?;
        let (q_loss, actor_loss) = self.paddpg_update(&batch)?;
        self.sync_targets()?;
        Ok(Some(UpdateStats { q_loss, actor_loss }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear(weights: Matrix, biases: Vec<f64>) -> DenseNet {
        DenseNet::from_layers(vec![Layer::new(weights, biases, Activation::Linear).unwrap()]).unwrap()
    }

    fn hand_agent(critic_w: &[f64], actor_bias: Vec<f64>) -> PaddpgAgent {
        // K = 2, one parameter each, state_dim 1: critic input width 1 + 2 + 2
        let space = ActionSpace::new(1, vec![1, 1]).unwrap();
        let critic = linear(Matrix::from_vec(5, 1, critic_w.to_vec()).unwrap(), vec![0.0]);
        let actor_net = linear(Matrix::zeros(1, 4), actor_bias);
        let actor = Actor::from_parts(actor_net, None, vec![(-1.0, 1.0); 4]).unwrap();
        let config = PaddpgConfig {
            lr_critic: 0.1,
            lr_actor: 0.1,
            ..PaddpgConfig::default()
        };
        PaddpgAgent::from_parts(space, config, critic, actor).unwrap()
    }

    #[test]
    fn greedy_picks_largest_score() {
        let mut a = hand_agent(&[0.0; 5], vec![0.9, -0.2, 0.3, 0.4]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let act = a.select_action(&[0.5], false, &mut rng).unwrap();
        assert_eq!(act.action, 0);
        assert_eq!(act.scores, vec![0.9, -0.2]);
        assert_eq!(act.params, vec![0.3]);
    }

    #[test]
    fn exploration_keeps_scores_in_range() {
        let mut a = hand_agent(&[0.0; 5], vec![0.99, -0.99, 0.0, 0.0]);
        a.noise = OuNoise::new(4, 0.15, 0.5, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let act = a.select_action(&[0.0], true, &mut rng).unwrap();
            assert!(act.scores.iter().chain(&act.joint).all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn terminal_critic_target_is_reward() {
        let a = hand_agent(&[1.0; 5], vec![0.0; 4]);
        let t = Transition::new(vec![0.3], 0, vec![0.0, 0.0], 0.7, vec![0.1], true).with_scores(vec![0.0, 0.0]);
        assert_eq!(a.one_step_targets(&[&t]).unwrap(), vec![0.7]);
    }

    #[test]
    fn constant_critic_leaves_actor_unchanged() {
        let mut a = hand_agent(&[0.0; 5], vec![0.1, 0.2, 0.3, 0.4]);
        let before = a.actor().clone();
        let t = Transition::new(vec![0.3], 0, vec![0.0, 0.0], 0.0, vec![0.1], true).with_scores(vec![0.0, 0.0]);
        a.paddpg_update(&[&t]).unwrap();
        assert_eq!(a.actor(), &before);
    }

    #[test]
    fn one_update_by_hand() {
        // Critic Q = w·(s, f1, f2, x1, x2) with w = (0, 1, 0, 0.5, 0), bias 0.
        // Actor emits constant (0.2, 0, 0.4, 0) through its bias.
        let mut a = hand_agent(&[0.0, 1.0, 0.0, 0.5, 0.0], vec![0.2, 0.0, 0.4, 0.0]);
        let t = Transition::new(vec![1.0], 0, vec![0.6, 0.0], 1.0, vec![0.0], true).with_scores(vec![0.5, -0.5]);
        let (critic_loss, actor_loss) = a.paddpg_update(&[&t]).unwrap();
        // Q(s, a) = 0.5 + 0.3 = 0.8, y = 1 → loss ½·0.04
        assert!((critic_loss - 0.02).abs() < 1e-12);
        // Adam's first step moves a parameter with gradient g by
        // −lr·g/(|g| + ε). dL/dw = (Q − y)·input = −0.2·(1, 0.5, −0.5, 0.6, 0).
        let adam = |g: f64| if g == 0.0 { 0.0 } else { -0.1 * g / (g.abs() + 1e-8) };
        let w = a.critic().layers()[0].weights.as_slice().to_vec();
        let expected = [
            0.0 + adam(-0.2),
            1.0 + adam(-0.1),
            0.0 + adam(0.1),
            0.5 + adam(-0.12),
            0.0,
        ];
        for (got, want) in w.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{w:?}");
        }
        let bias = a.critic().layers()[0].biases[0];
        assert!((bias - adam(-0.2)).abs() < 1e-12);

        // Actor loss is measured with the updated critic at a = (0.2, 0, 0.4, 0), s = 1.
        let q_after = w[0] + w[1] * 0.2 + w[3] * 0.4 + bias;
        assert!((actor_loss + q_after).abs() < 1e-12);
        // Inverted ∂Q/∂a: f1 w1·(1 − 0.2)/2, f2 w2·(0 + 1)/2, x1 w3·(1 − 0.4)/2, x2 0.
        // The actor descends −∂Q/∂a, so its bias gradient is the negation.
        let inverted = [w[1] * 0.4, w[2] * 0.5, w[3] * 0.3, 0.0];
        let b = &a.actor().net().layers()[0].biases;
        let start = [0.2, 0.0, 0.4, 0.0];
        for ((got, s0), g) in b.iter().zip(start).zip(inverted) {
            assert!((got - (s0 + adam(-g))).abs() < 1e-12, "{b:?}");
        }
    }
}
