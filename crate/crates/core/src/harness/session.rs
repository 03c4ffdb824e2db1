use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, RunConfig};
use crate::agent::{Agent, BootstrapTarget, PaddpgAgent, ParameterisedAction, PdqnAgent, UpdateStats};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::policy::ParamScaler;
use crate::qfunction::ActionSpace;
use crate::replay::{ReplayBuffer, Transition};

/// SplitMix64 finaliser applied to `x + 0x9E3779B97F4A7C15`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// RNG stream seed for `seed` under `master`:
/// `splitmix64(master ^ splitmix64(seed))`. Each stream depends only on its
/// own `(master, seed)` pair, so adding seeds never changes existing runs.
pub fn derive_seed(master: u64, seed: u64) -> u64 {
    splitmix64(master ^ splitmix64(seed))
}

/// Evaluation draws from its own stream so it never perturbs training.
const EVAL_STREAM: u64 = 0x6576_616c;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum AnyAgent {
    Pdqn(PdqnAgent),
    Paddpg(PaddpgAgent),
}

impl AnyAgent {
    pub fn build<R: Rng + ?Sized>(cfg: &RunConfig, env: &dyn Environment, rng: &mut R) -> Result<Self> {
        let space = env.action_space();
        let passthrough = env.default_passthrough();
        Ok(match cfg.algorithm {
            Algorithm::Paddpg => AnyAgent::Paddpg(PaddpgAgent::new(space, cfg.paddpg_config()?, passthrough, rng)?),
            _ => AnyAgent::Pdqn(PdqnAgent::new(space, cfg.pdqn_config()?, passthrough, rng)?),
        })
    }

    pub fn as_pdqn(&self) -> Option<&PdqnAgent> {
        match self {
            AnyAgent::Pdqn(a) => Some(a),
            AnyAgent::Paddpg(_) => None,
        }
    }
}

macro_rules! delegate {
    ($self:ident, $a:ident => $body:expr) => {
        match $self {
            AnyAgent::Pdqn($a) => $body,
            AnyAgent::Paddpg($a) => $body,
        }
    };
}

impl BootstrapTarget for AnyAgent {
    fn gamma(&self) -> f64 {
        delegate!(self, a => a.gamma())
    }

    fn one_step_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        delegate!(self, a => a.one_step_targets(batch))
    }
}

impl Agent for AnyAgent {
    fn action_space(&self) -> &ActionSpace {
        delegate!(self, a => a.action_space())
    }

    fn begin_episode(&mut self, episode: u64) {
        delegate!(self, a => a.begin_episode(episode))
    }

    fn epsilon(&self) -> f64 {
        delegate!(self, a => a.epsilon())
    }

    fn mixing_ratio(&self) -> f64 {
        delegate!(self, a => a.mixing_ratio())
    }

    fn select_action<R: Rng + ?Sized>(
        &mut self,
        state: &[f64],
        explore: bool,
        rng: &mut R,
    ) -> Result<ParameterisedAction> {
        delegate!(self, a => a.select_action(state, explore, rng))
    }

    fn update<R: Rng + ?Sized>(&mut self, replay: &ReplayBuffer, rng: &mut R) -> Result<Option<UpdateStats>> {
        delegate!(self, a => a.update(replay, rng))
    }
}

/// One row of a training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub episode: u64,
    pub ret: f64,
    pub steps: u64,
    pub epsilon: f64,
    /// Mean over the episode's updates; `None` before learning starts.
    pub q_loss: Option<f64>,
    pub actor_loss: Option<f64>,
}

/// One row of an evaluation log.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub seed: u64,
    pub episode: u64,
    pub ret: f64,
    pub steps: u64,
}

/// A visited state and the action the greedy policy took there.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    pub state: Vec<f64>,
    pub action: ParameterisedAction,
    pub reward: f64,
}

/// Saved agent state. On disk: the line `mpdqn-checkpoint 1`, then one JSON
/// document holding this struct. The replay memory is not saved.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub seed: u64,
    pub episodes_completed: u64,
    pub agent: AnyAgent,
    pub rng: ChaCha8Rng,
}

impl Checkpoint {
    pub const MAGIC: &'static str = "mpdqn-checkpoint";
    pub const VERSION: u32 = 1;

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let body = serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let text = format!("{} {}\n{body}\n", Self::MAGIC, Self::VERSION);
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (header, body) = text
            .split_once('\n')
            .ok_or_else(|| Error::Checkpoint("missing header line".into()))?;
        let version = header
            .strip_prefix(Self::MAGIC)
            .map(str::trim)
            .ok_or_else(|| Error::Checkpoint("not a checkpoint file".into()))?;
        if version != Self::VERSION.to_string() {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version '{version}'")));
        }
        let ckpt: Self = serde_json::from_str(body).map_err(|e| Error::Checkpoint(e.to_string()))?;
        ckpt.config.validate()?;
        Ok(ckpt)
    }
}

/// Agent, environment, replay memory and RNG for one seed.
pub struct Session {
    config: RunConfig,
    seed: u64,
    agent: AnyAgent,
    env: Box<dyn Environment>,
    scaler: ParamScaler,
    replay: ReplayBuffer,
    rng: ChaCha8Rng,
    episodes_done: u64,
}

impl Session {
    pub fn new(config: &RunConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let env = config.env.build()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.master_seed, seed));
        let agent = AnyAgent::build(config, env.as_ref(), &mut rng)?;
        Self::assemble(config.clone(), seed, agent, env, rng, 0)
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Result<Self> {
        let env = ckpt.config.env.build()?;
        if ckpt.agent.action_space() != &env.action_space() {
            return Err(Error::Checkpoint(
                "agent does not match the configured environment".into(),
            ));
        }
        Self::assemble(
            ckpt.config,
            ckpt.seed,
            ckpt.agent,
            env,
            ckpt.rng,
            ckpt.episodes_completed,
        )
    }

    fn assemble(
        config: RunConfig,
        seed: u64,
        agent: AnyAgent,
        env: Box<dyn Environment>,
        rng: ChaCha8Rng,
        episodes_done: u64,
    ) -> Result<Self> {
        let scaler = ParamScaler::new(env.native_bounds())?;
        let replay = ReplayBuffer::new(config.replay_capacity, env.action_space())?;
        Ok(Self {
            config,
            seed,
            agent,
            env,
            scaler,
            replay,
            rng,
            episodes_done,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn agent(&self) -> &AnyAgent {
        &self.agent
    }

    pub fn agent_mut(&mut self) -> &mut AnyAgent {
        &mut self.agent
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn episodes_done(&self) -> u64 {
        self.episodes_done
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            seed: self.seed,
            episodes_completed: self.episodes_done,
            agent: self.agent.clone(),
            rng: self.rng.clone(),
        }
    }

    fn act(
        &mut self,
        state: &[f64],
        explore: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<(ParameterisedAction, crate::envs::Step)> {
        let action = self.agent.select_action(state, explore, rng)?;
        let native = self.scaler.unscale(&action.joint)?;
        let block = self.agent.action_space().block_range(action.action);
        let step = self.env.step(action.action, &native[block])?;
        Ok((action, step))
    }

    /// One exploring episode with learning after every step; the episode's
    /// transitions enter replay once it ends.
    pub fn train_episode(&mut self) -> Result<EpisodeRecord> {
        let episode = self.episodes_done;
        self.agent.begin_episode(episode);
        let epsilon = self.agent.epsilon();
        let mut state = self.env.reset(episode);
        let mut rng = self.rng.clone();
        let mut transitions = Vec::new();
        let (mut q_sum, mut actor_sum, mut updates) = (0.0, 0.0, 0u64);
        let mut ret = 0.0;
        loop {
            let (action, step) = self.act(&state, true, &mut rng)?;
            ret += step.reward;
            transitions.push(
                Transition::new(
                    state,
                    action.action,
                    action.joint,
                    step.reward,
                    step.state.clone(),
                    step.terminal,
                )
                .with_scores(action.scores),
            );
            if let Some(stats) = self.agent.update(&self.replay, &mut rng)? {
                q_sum += stats.q_loss;
                actor_sum += stats.actor_loss;
                updates += 1;
            }
            state = step.state;
            if step.terminal {
                break;
            }
        }
        self.rng = rng;
        let steps = transitions.len() as u64;
        let beta = self.agent.mixing_ratio();
        self.replay.finalize_episode(transitions, &self.agent, beta)?;
        self.episodes_done += 1;
        let mean = |sum: f64| (updates > 0).then(|| sum / updates as f64);
        Ok(EpisodeRecord {
            seed: self.seed,
            episode,
            ret,
            steps,
            epsilon,
            q_loss: mean(q_sum),
            actor_loss: mean(actor_sum),
        })
    }

    fn eval_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(derive_seed(self.config.master_seed ^ EVAL_STREAM, self.seed))
    }

    /// Greedy rollout without noise or learning.
    pub fn greedy_trajectory(&mut self, episode: u64) -> Result<Vec<TrajectoryStep>> {
        let mut rng = self.eval_rng();
        let mut state = self.env.reset(episode);
        let mut out = Vec::new();
        loop {
            let (action, step) = self.act(&state, false, &mut rng)?;
            out.push(TrajectoryStep {
                state,
                action,
                reward: step.reward,
            });
            state = step.state;
            if step.terminal {
                return Ok(out);
            }
        }
    }

    pub fn eval_episode(&mut self, episode: u64) -> Result<EvalRecord> {
        let trajectory = self.greedy_trajectory(episode)?;
        Ok(EvalRecord {
            seed: self.seed,
            episode,
            ret: trajectory.iter().map(|t| t.reward).sum(),
            steps: trajectory.len() as u64,
        })
    }
}
