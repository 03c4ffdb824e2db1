//! Environments with a uniform reset/step interface.
//!
//! Agents see parameters scaled to `[-1, 1]`; [`Environment::step`] takes
//! them in native units. [`ParamScaler`](crate::policy::ParamScaler) built
//! from [`Environment::native_bounds`] converts between the two.

mod platform;
mod synthetic;

pub use platform::{Platform, PlatformConfig, HOP, LEAP, RUN};
pub use synthetic::{oracle_q, ChainPamdp, Oracle, ParamBandit};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::Passthrough;
use crate::qfunction::ActionSpace;

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
}

pub trait Environment {
    fn name(&self) -> &'static str;

    fn state_dim(&self) -> usize;

    fn param_dims(&self) -> Vec<usize>;

    /// Native `(min, max)` per joint parameter slot.
    fn native_bounds(&self) -> Vec<(f64, f64)>;

    /// The agent-facing space, every slot scaled to `[-1, 1]`.
    fn action_space(&self) -> ActionSpace {
        ActionSpace::new(self.state_dim(), self.param_dims()).expect("environments declare valid spaces")
    }

    fn reset(&mut self, seed: u64) -> Vec<f64>;

    /// Executes discrete action `action` with its own native parameters.
    fn step(&mut self, action: usize, params: &[f64]) -> Result<Step>;

    /// Initial actor policy over the scaled joint parameters, if any.
    fn default_passthrough(&self) -> Option<Passthrough> {
        None
    }
}

/// Environment selection as written in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnvSpec {
    Platform(PlatformConfig),
    Bandit,
    Chain,
}

impl EnvSpec {
    pub fn id(&self) -> &'static str {
        match self {
            EnvSpec::Platform(_) => "platform",
            EnvSpec::Bandit => "bandit",
            EnvSpec::Chain => "chain",
        }
    }

    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "platform" => Ok(EnvSpec::Platform(PlatformConfig::default())),
            "bandit" => Ok(EnvSpec::Bandit),
            "chain" => Ok(EnvSpec::Chain),
            other => Err(Error::Config(format!(
                "unknown environment '{other}' (expected platform, bandit or chain)"
            ))),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvSpec::Platform(cfg) => Box::new(Platform::new(cfg.clone())?),
            EnvSpec::Bandit => Box::new(ParamBandit::new()),
            EnvSpec::Chain => Box::new(ChainPamdp::new()),
        })
    }
}

/// Checks that `params` is `action`'s block and lies inside its native bounds.
pub(crate) fn check_params(param_dims: &[usize], bounds: &[(f64, f64)], action: usize, params: &[f64]) -> Result<()> {
    if action >= param_dims.len() {
        return Err(Error::InvalidArgument(format!(
            "action {action} out of range for {} actions",
            param_dims.len()
        )));
    }
    crate::error::ensure_dim("step parameters", param_dims[action], params.len())?;
    let offset: usize = param_dims[..action].iter().sum();
    for (i, &v) in params.iter().enumerate() {
        let (min, max) = bounds[offset + i];
        if !(v >= min && v <= max) {
            return Err(Error::OutOfBounds {
                index: offset + i,
                value: v,
                min,
                max,
            });
        }
    }
    Ok(())
}
