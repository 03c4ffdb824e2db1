//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored, every key may appear once, and
//! unknown keys are errors. `algorithm` and `env` choose the defaults the
//! remaining keys override. Sweep files add `sweep.<key> = v1 | v2 | ...`
//! axes; see [`SweepSpec`](super::SweepSpec).

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agent::{PaddpgConfig, PdqnConfig};
use crate::envs::{EnvSpec, PlatformConfig};
use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::policy::{EpsilonSchedule, OuNoise};
use crate::qfunction::QVariant;
use crate::replay::ReplayBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    PdqnJoint,
    PdqnSeparate,
    PdqnMultipass,
    Paddpg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::PdqnJoint,
        Algorithm::PdqnSeparate,
        Algorithm::PdqnMultipass,
        Algorithm::Paddpg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::PdqnJoint => "pdqn-joint",
            Algorithm::PdqnSeparate => "pdqn-separate",
            Algorithm::PdqnMultipass => "pdqn-multipass",
            Algorithm::Paddpg => "paddpg",
        }
    }

    pub fn variant(self) -> Option<QVariant> {
        match self {
            Algorithm::PdqnJoint => Some(QVariant::Joint),
            Algorithm::PdqnSeparate => Some(QVariant::Separate),
            Algorithm::PdqnMultipass => Some(QVariant::MultiPass),
            Algorithm::Paddpg => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown algorithm '{s}' (expected pdqn-joint, pdqn-separate, pdqn-multipass or paddpg)"
            ))
        })
    }
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    (
        "algorithm",
        "pdqn-joint | pdqn-separate | pdqn-multipass | paddpg (default pdqn-multipass)",
    ),
    ("env", "platform | bandit | chain (default platform)"),
    ("gamma", "discount in [0, 1) (default 0.9)"),
    ("batch_size", "minibatch size >= 1 (128; paddpg 32)"),
    ("lr_q", "critic learning rate > 0 (1e-3)"),
    ("lr_actor", "actor learning rate > 0 (1e-4)"),
    ("tau_q", "critic Polyak factor in (0, 1] (0.1; paddpg 0.01)"),
    ("tau_actor", "actor Polyak factor in (0, 1] (0.001; paddpg 0.01)"),
    ("hidden", "comma-separated hidden layer widths (128; paddpg 256,128)"),
    ("activation", "relu | leaky_relu | leaky_relu:<slope> (relu)"),
    ("replay_capacity", "replay memory size >= 1 (10000)"),
    ("clip_norm", "global gradient norm clip > 0 (10)"),
    ("beta", "Monte Carlo mixing ratio in [0, 1] (0)"),
    ("initial_fill", "transitions stored before learning starts (128)"),
    ("invert_gradients", "true | false (true)"),
    ("epsilon_start", "initial exploration rate in [0, 1] (1.0)"),
    ("epsilon_end", "final exploration rate in [0, epsilon_start] (0.01)"),
    ("epsilon_episodes", "episodes to anneal over (10% of episodes)"),
    ("ou_theta", "OU mean reversion >= 0 (0.15)"),
    ("ou_sigma", "OU volatility >= 0 (0.0001)"),
    ("ou_mu", "OU mean (0)"),
    ("episodes", "training episodes per seed (80000)"),
    ("eval_episodes", "exploration-free evaluation episodes per seed (1000)"),
    ("seeds", "comma-separated seeds (0,1,2,3,4)"),
    ("master_seed", "root of the per-seed RNG streams (0)"),
    ("out_dir", "output directory (runs)"),
    (
        "checkpoint_every",
        "episodes between intermediate checkpoints, 0 = end only (0)",
    ),
    ("platform.length", "total length L (100)"),
    (
        "platform.platforms",
        "start:end intervals, comma-separated (0:30,38:68,74:100)",
    ),
    ("platform.enemy_speed", "enemy patrol speed per step (1)"),
    ("platform.enemy_inset", "patrol range inset from platform edges (2)"),
    ("platform.run", "run displacement base,slope (3,12)"),
    ("platform.hop", "hop displacement base,slope (5,15)"),
    ("platform.leap", "leap displacement base,slope (20,15)"),
];

/// One fully-resolved training/evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub env: EnvSpec,
    pub gamma: f64,
    pub batch_size: usize,
    pub lr_q: f64,
    pub lr_actor: f64,
    pub tau_q: f64,
    pub tau_actor: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub replay_capacity: usize,
    pub clip_norm: f64,
    pub beta: f64,
    pub initial_fill: usize,
    pub invert_gradients: bool,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// `None` anneals over the first tenth of `episodes`.
    pub epsilon_episodes: Option<u64>,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub ou_mu: f64,
    pub episodes: u64,
    pub eval_episodes: u64,
    pub seeds: Vec<u64>,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    pub checkpoint_every: u64,
}

impl RunConfig {
    /// Defaults for `algorithm` on `env`.
    pub fn defaults(algorithm: Algorithm, env: EnvSpec) -> Self {
        let pdqn = PdqnConfig::default();
        let mut cfg = Self {
            algorithm,
            env,
            gamma: pdqn.gamma,
            batch_size: pdqn.batch_size,
            lr_q: pdqn.lr_q,
            lr_actor: pdqn.lr_actor,
            tau_q: pdqn.tau_q,
            tau_actor: pdqn.tau_actor,
            hidden: pdqn.hidden,
            activation: pdqn.activation,
            replay_capacity: ReplayBuffer::PLATFORM_CAPACITY,
            clip_norm: pdqn.clip_norm,
            beta: pdqn.beta,
            initial_fill: pdqn.initial_fill,
            invert_gradients: pdqn.invert_gradients,
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            epsilon_episodes: None,
            ou_theta: OuNoise::DEFAULT_THETA,
            ou_sigma: OuNoise::DEFAULT_SIGMA,
            ou_mu: 0.0,
            episodes: 80_000,
            eval_episodes: 1000,
            seeds: (0..5).collect(),
            master_seed: 0,
            out_dir: PathBuf::from("runs"),
            checkpoint_every: 0,
        };
        if algorithm == Algorithm::Paddpg {
            let p = PaddpgConfig::default();
            cfg.batch_size = p.batch_size;
            cfg.lr_q = p.lr_critic;
            cfg.lr_actor = p.lr_actor;
            cfg.tau_q = p.tau_critic;
            cfg.tau_actor = p.tau_actor;
            cfg.hidden = p.hidden;
        }
        cfg
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        if let Some(key) = pairs.keys().find(|k| k.starts_with("sweep.")) {
            return Err(Error::Config(format!(
                "'{key}' is a sweep axis; run this file with the sweep command"
            )));
        }
        Self::from_pairs(&pairs)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub(crate) fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        for key in pairs.keys() {
            if !KEYS.iter().any(|(k, _)| k == key) {
                return Err(Error::Config(format!("unknown key '{key}'")));
            }
        }
        let algorithm = match pairs.get("algorithm") {
            Some(v) => v.parse()?,
            None => Algorithm::PdqnMultipass,
        };
        let mut env = match pairs.get("env") {
            Some(v) => EnvSpec::from_id(v)?,
            None => EnvSpec::Platform(PlatformConfig::default()),
        };
        for (key, value) in pairs.iter().filter(|(k, _)| k.starts_with("platform.")) {
            let EnvSpec::Platform(p) = &mut env else {
                return Err(Error::Config(format!("'{key}' only applies to env = platform")));
            };
            apply_platform(p, &key["platform.".len()..], value).map_err(|e| Error::Config(format!("{key}: {e}")))?;
        }
        let mut cfg = Self::defaults(algorithm, env);
        for (key, value) in pairs {
            if key == "algorithm" || key == "env" || key.starts_with("platform.") {
                continue;
            }
            cfg.apply(key, value)
                .map_err(|e| Error::Config(format!("{key}: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "gamma" => self.gamma = num(v)?,
            "batch_size" => self.batch_size = num(v)?,
            "lr_q" => self.lr_q = num(v)?,
            "lr_actor" => self.lr_actor = num(v)?,
            "tau_q" => self.tau_q = num(v)?,
            "tau_actor" => self.tau_actor = num(v)?,
            "hidden" => self.hidden = list(v)?,
            "activation" => self.activation = activation(v)?,
            "replay_capacity" => self.replay_capacity = num(v)?,
            "clip_norm" => self.clip_norm = num(v)?,
            "beta" => self.beta = num(v)?,
            "initial_fill" => self.initial_fill = num(v)?,
            "invert_gradients" => self.invert_gradients = num(v)?,
            "epsilon_start" => self.epsilon_start = num(v)?,
            "epsilon_end" => self.epsilon_end = num(v)?,
            "epsilon_episodes" => self.epsilon_episodes = Some(num(v)?),
            "ou_theta" => self.ou_theta = num(v)?,
            "ou_sigma" => self.ou_sigma = num(v)?,
            "ou_mu" => self.ou_mu = num(v)?,
            "episodes" => self.episodes = num(v)?,
            "eval_episodes" => self.eval_episodes = num(v)?,
            "seeds" => self.seeds = list(v)?,
            "master_seed" => self.master_seed = num(v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "checkpoint_every" => self.checkpoint_every = num(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if let EnvSpec::Platform(p) = &self.env {
            p.validate()?;
        }
        let bad = |msg: String| Err(Error::Config(msg));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad(format!("hidden must list positive widths, got {:?}", self.hidden));
        }
        if self.replay_capacity == 0 {
            return bad("replay_capacity must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=self.epsilon_start).contains(&self.epsilon_end) {
            return bad(format!(
                "need 1 >= epsilon_start >= epsilon_end >= 0, got {} and {}",
                self.epsilon_start, self.epsilon_end
            ));
        }
        if !(self.ou_theta >= 0.0 && self.ou_sigma >= 0.0 && self.ou_mu.is_finite()) {
            return bad("ou_theta and ou_sigma must be non-negative".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return bad(format!("seeds must be distinct, got {:?}", self.seeds));
        }
        match self.algorithm {
            Algorithm::Paddpg => self.paddpg_config()?.validate(),
            _ => self.pdqn_config()?.validate(),
        }
        .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn epsilon_schedule(&self) -> Result<EpsilonSchedule> {
        let horizon = self.epsilon_episodes.unwrap_or(self.episodes / 10);
        EpsilonSchedule::new(self.epsilon_start, self.epsilon_end, horizon)
    }

    pub fn pdqn_config(&self) -> Result<PdqnConfig> {
        let variant = self.algorithm.variant().ok_or(Error::WrongVariant {
            expected: "a pdqn algorithm",
            got: "paddpg",
        })?;
        Ok(PdqnConfig {
            variant,
            gamma: self.gamma,
            batch_size: self.batch_size,
            lr_q: self.lr_q,
            lr_actor: self.lr_actor,
            tau_q: self.tau_q,
            tau_actor: self.tau_actor,
            hidden: self.hidden.clone(),
            activation: self.activation,
            clip_norm: self.clip_norm,
            beta: self.beta,
            initial_fill: self.initial_fill,
            invert_gradients: self.invert_gradients,
            epsilon: self.epsilon_schedule()?,
            ou_theta: self.ou_theta,
            ou_sigma: self.ou_sigma,
            ou_mu: self.ou_mu,
        })
    }

    pub fn paddpg_config(&self) -> Result<PaddpgConfig> {
        Ok(PaddpgConfig {
            gamma: self.gamma,
            batch_size: self.batch_size,
            lr_critic: self.lr_q,
            lr_actor: self.lr_actor,
            tau_critic: self.tau_q,
            tau_actor: self.tau_actor,
            hidden: self.hidden.clone(),
            activation: self.activation,
            clip_norm: self.clip_norm,
            beta: self.beta,
            initial_fill: self.initial_fill,
            invert_gradients: self.invert_gradients,
            epsilon: self.epsilon_schedule()?,
            ou_theta: self.ou_theta,
            ou_sigma: self.ou_sigma,
            ou_mu: self.ou_mu,
        })
    }
}

/// Splits config text into key/value pairs, rejecting malformed lines and
/// repeated keys.
pub(crate) fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected 'key = value', got '{raw}'",
                n + 1
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config(format!("line {}: empty key or value", n + 1)));
        }
        if pairs.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", n + 1)));
        }
    }
    Ok(pairs)
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| format!("cannot parse '{v}': {e}"))
}

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    v.split(',').map(|s| num(s.trim())).collect()
}

fn pair(v: &str) -> std::result::Result<(f64, f64), String> {
    match list::<f64>(v)?[..] {
        [a, b] => Ok((a, b)),
        _ => Err(format!("expected two comma-separated numbers, got '{v}'")),
    }
}

fn activation(v: &str) -> std::result::Result<Activation, String> {
    match v.split_once(':') {
        None if v == "relu" => Ok(Activation::Relu),
        None if v == "leaky_relu" => Ok(Activation::LeakyRelu(0.01)),
        Some(("leaky_relu", slope)) => Ok(Activation::LeakyRelu(num(slope)?)),
        _ => Err(format!("unknown activation '{v}'")),
    }
}

fn apply_platform(p: &mut PlatformConfig, key: &str, v: &str) -> std::result::Result<(), String> {
    match key {
        "length" => p.length = num(v)?,
        "enemy_speed" => p.enemy_speed = num(v)?,
        "enemy_inset" => p.enemy_inset = num(v)?,
        "run" => p.run = pair(v)?,
        "hop" => p.hop = pair(v)?,
        "leap" => p.leap = pair(v)?,
        "platforms" => {
            p.platforms = v
                .split(',')
                .map(|iv| {
                    let (a, b) = iv
                        .split_once(':')
                        .ok_or_else(|| format!("expected start:end, got '{iv}'"))?;
                    Ok((num(a.trim())?, num(b.trim())?))
                })
                .collect::<std::result::Result<_, String>>()?
        }
        _ => return Err("unknown key".into()),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_algorithm() {
        let mp = RunConfig::from_text("").unwrap();
        assert_eq!(mp.algorithm, Algorithm::PdqnMultipass);
        assert_eq!((mp.batch_size, mp.tau_q, mp.tau_actor), (128, 0.1, 0.001));
        assert_eq!(mp.hidden, vec![128]);
        assert_eq!(mp.episodes, 80_000);
        assert_eq!(mp.eval_episodes, 1000);
        assert_eq!(mp.seeds.len(), 5);

        let pa = RunConfig::from_text("algorithm = paddpg").unwrap();
        assert_eq!(pa.hidden, vec![256, 128]);
        assert_eq!((pa.batch_size, pa.tau_q, pa.tau_actor), (32, 0.01, 0.01));
    }

    #[test]
    fn parses_overrides() {
        let text = "
            # comment
            algorithm = pdqn-joint
            env = platform
            hidden = 256, 128   # trailing comment
            activation = leaky_relu:0.05
            seeds = 3,9
            platform.platforms = 0:20, 25:100
            platform.length = 100
            platform.leap = 10, 5
            invert_gradients = false
        ";
        let cfg = RunConfig::from_text(text).unwrap();
        assert_eq!(cfg.hidden, vec![256, 128]);
        assert_eq!(cfg.activation, Activation::LeakyRelu(0.05));
        assert_eq!(cfg.seeds, vec![3, 9]);
        assert!(!cfg.invert_gradients);
        let EnvSpec::Platform(p) = &cfg.env else { panic!() };
        assert_eq!(p.platforms, vec![(0.0, 20.0), (25.0, 100.0)]);
        assert_eq!(p.leap, (10.0, 5.0));
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "learning_rate = 0.1",
            "gamma = 1.5",
            "gamma = 0.9\ngamma = 0.8",
            "tau_q = 0",
            "hidden = 0",
            "seeds = 1,1",
            "env = chain\nplatform.length = 50",
            "platform.platforms = 0:40, 38:100",
            "epsilon_start = 0.1\nepsilon_end = 0.5",
            "no equals sign",
            "algorithm = dqn",
            "sweep.lr_q = 1e-3 | 1e-4",
        ] {
            assert!(RunConfig::from_text(text).is_err(), "{text}");
        }
    }

    #[test]
    fn epsilon_defaults_to_tenth_of_budget() {
        let cfg = RunConfig::from_text("episodes = 1000").unwrap();
        let s = cfg.epsilon_schedule().unwrap();
        assert_eq!(s.value_at(0), 1.0);
        assert_eq!(s.value_at(100), 0.01);
        assert!((s.value_at(50) - 0.505).abs() < 1e-12);
    }
}
