//! Tiny PAMDPs whose optimal action-values are known in closed form.

use super::{check_params, EnvSpec, Environment, Step};
use crate::error::{Error, Result};

/// One-step bandit with a constant state `[1.0]` and two actions, each with
/// one parameter in `[-1, 1]`:
/// `r(0, x) = 1 − (x − 0.3)²`, `r(1, x) = 0.8 − 2(x + 0.5)²`.
#[derive(Debug, Clone, Default)]
pub struct ParamBandit {
    done: bool,
}

impl ParamBandit {
    pub const STATE: [f64; 1] = [1.0];

    pub fn new() -> Self {
        Self { done: false }
    }

    pub fn reward(action: usize, x: f64) -> f64 {
        match action {
            0 => 1.0 - (x - 0.3).powi(2),
            _ => 0.8 - 2.0 * (x + 0.5).powi(2),
        }
    }
}

impl Environment for ParamBandit {
    fn name(&self) -> &'static str {
        "bandit"
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn param_dims(&self) -> Vec<usize> {
        vec![1, 1]
    }

    fn native_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0); 2]
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.done = false;
        Self::STATE.to_vec()
    }

    fn step(&mut self, action: usize, params: &[f64]) -> Result<Step> {
        if self.done {
            return Err(Error::StepAfterTerminal);
        }
        check_params(&self.param_dims(), &self.native_bounds(), action, params)?;
        self.done = true;
        Ok(Step {
            state: Self::STATE.to_vec(),
            reward: Self::reward(action, params[0]),
            terminal: true,
        })
    }
}

/// Three-state chain, states one-hot encoded. `move(x)` (action 0) goes from
/// `i` to `i + 1` paying `1 − (x − g_i)²` with `g = (−0.5, 0.5)`; `stop(x)`
/// (action 1) ends the episode paying 0.2. Reaching state 2 ends it too.
#[derive(Debug, Clone, Default)]
pub struct ChainPamdp {
    position: usize,
    done: bool,
}

impl ChainPamdp {
    pub const GOALS: [f64; 2] = [-0.5, 0.5];
    pub const STOP_REWARD: f64 = 0.2;
    pub const MOVE: usize = 0;
    pub const STOP: usize = 1;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn one_hot(position: usize) -> Vec<f64> {
        let mut s = vec![0.0; 3];
        s[position] = 1.0;
        s
    }

    pub fn position(&self) -> usize {
        self.position
    }
}

impl Environment for ChainPamdp {
    fn name(&self) -> &'static str {
        "chain"
    }

    fn state_dim(&self) -> usize {
        3
    }

    fn param_dims(&self) -> Vec<usize> {
        vec![1, 1]
    }

    fn native_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0); 2]
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.position = 0;
        self.done = false;
        Self::one_hot(0)
    }

    fn step(&mut self, action: usize, params: &[f64]) -> Result<Step> {
        if self.done {
            return Err(Error::StepAfterTerminal);
        }
        check_params(&self.param_dims(), &self.native_bounds(), action, params)?;
        let reward = if action == Self::STOP {
            self.done = true;
            Self::STOP_REWARD
        } else {
            let r = 1.0 - (params[0] - Self::GOALS[self.position]).powi(2);
            self.position += 1;
            self.done = self.position == 2;
            r
        };
        Ok(Step {
            state: Self::one_hot(self.position),
            reward,
            terminal: self.done,
        })
    }
}

/// Closed-form `Q*` for a synthetic environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Oracle {
    Bandit,
    Chain { gamma: f64 },
}

/// Fails with [`Error::Unsupported`] for environments without a closed form.
pub fn oracle_q(env: &EnvSpec, gamma: f64) -> Result<Oracle> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("discount {gamma} outside [0, 1]")));
    }
    match env {
        EnvSpec::Bandit => Ok(Oracle::Bandit),
        EnvSpec::Chain => Ok(Oracle::Chain { gamma }),
        EnvSpec::Platform(_) => Err(Error::Unsupported("no closed-form oracle for platform")),
    }
}

impl Oracle {
    fn chain_position(state: &[f64]) -> Result<usize> {
        crate::error::ensure_dim("chain state", 3, state.len())?;
        let ones: Vec<usize> = (0..3).filter(|&i| state[i] == 1.0).collect();
        match ones[..] {
            [i] if state.iter().sum::<f64>() == 1.0 => Ok(i),
            _ => Err(Error::InvalidArgument(format!(
                "{state:?} is not a one-hot chain state"
            ))),
        }
    }

    /// `Q*(s, k, x)`.
    pub fn q(&self, state: &[f64], action: usize, x: f64) -> Result<f64> {
        if action > 1 {
            return Err(Error::InvalidArgument(format!("action {action} out of range")));
        }
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::OutOfBounds {
                index: action,
                value: x,
                min: -1.0,
                max: 1.0,
            });
        }
        match *self {
            Oracle::Bandit => Ok(ParamBandit::reward(action, x)),
            Oracle::Chain { gamma } => {
                let i = Self::chain_position(state)?;
                if i == 2 {
                    return Ok(0.0);
                }
                if action == ChainPamdp::STOP {
                    return Ok(ChainPamdp::STOP_REWARD);
                }
                let next = ChainPamdp::one_hot(i + 1);
                Ok(1.0 - (x - ChainPamdp::GOALS[i]).powi(2) + gamma * self.v(&next)?)
            }
        }
    }

    /// Maximising `(k, x)` at `state`.
    pub fn best_action(&self, state: &[f64]) -> Result<(usize, f64)> {
        match *self {
            Oracle::Bandit => Ok((0, 0.3)),
            Oracle::Chain { .. } => {
                let i = Self::chain_position(state)?;
                if i == 2 {
                    return Ok((ChainPamdp::STOP, 0.0));
                }
                let goal = ChainPamdp::GOALS[i];
                let best_move = self.q(state, ChainPamdp::MOVE, goal)?;
                if best_move >= ChainPamdp::STOP_REWARD {
                    Ok((ChainPamdp::MOVE, goal))
                } else {
                    Ok((ChainPamdp::STOP, 0.0))
                }
            }
        }
    }

    /// `V*(s) = max_k sup_x Q*(s, k, x)`.
    pub fn v(&self, state: &[f64]) -> Result<f64> {
        let (k, x) = self.best_action(state)?;
        self.q(state, k, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bandit_vertices() {
        let mut env = ParamBandit::new();
        env.reset(0);
        let s = env.step(0, &[0.3]).unwrap();
        assert_eq!((s.reward, s.terminal), (1.0, true));
        assert!(matches!(env.step(0, &[0.3]), Err(Error::StepAfterTerminal)));
        env.reset(0);
        assert!((env.step(1, &[-0.5]).unwrap().reward - 0.8).abs() < 1e-15);
        env.reset(0);
        assert!(matches!(env.step(0, &[1.5]), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn chain_dynamics() {
        let mut env = ChainPamdp::new();
        assert_eq!(env.reset(3), vec![1.0, 0.0, 0.0]);
        let a = env.step(ChainPamdp::MOVE, &[-0.5]).unwrap();
        let b = env.step(ChainPamdp::MOVE, &[0.5]).unwrap();
        assert_eq!((a.reward, a.terminal), (1.0, false));
        assert_eq!((b.reward, b.terminal), (1.0, true));
        assert_eq!(b.state, vec![0.0, 0.0, 1.0]);
        assert!(env.step(0, &[0.0]).is_err());

        env.reset(0);
        let stop = env.step(ChainPamdp::STOP, &[0.7]).unwrap();
        assert_eq!((stop.reward, stop.terminal), (0.2, true));
    }

    #[test]
    fn oracle_closed_forms() {
        let bandit = oracle_q(&EnvSpec::Bandit, 0.9).unwrap();
        assert_eq!(bandit.v(&[1.0]).unwrap(), 1.0);
        let chain = oracle_q(&EnvSpec::Chain, 0.9).unwrap();
        let s0 = ChainPamdp::one_hot(0);
        assert!((chain.q(&s0, 0, -0.5).unwrap() - 1.9).abs() < 1e-15);
        assert!((chain.q(&s0, 0, 0.0).unwrap() - (1.0 - 0.25 + 0.9)).abs() < 1e-15);
        assert!((chain.v(&s0).unwrap() - 1.9).abs() < 1e-15);
        assert!(chain.q(&[0.5, 0.5, 0.0], 0, 0.0).is_err());
        let platform = EnvSpec::Platform(Default::default());
        assert!(matches!(oracle_q(&platform, 0.9), Err(Error::Unsupported(_))));
    }

    #[test]
    fn oracle_matches_grid_search() {
        // Brute-force sup over x on a 1e-4 grid, one-step lookahead with the
        // grid value of the successor.
        let grid: Vec<f64> = (0..=20_000).map(|i| -1.0 + i as f64 * 1e-4).collect();
        let gamma = 0.9;
        let chain = oracle_q(&EnvSpec::Chain, gamma).unwrap();
        let mut v_next = 0.0;
        for i in (0..2).rev() {
            let s = ChainPamdp::one_hot(i);
            let best_move = grid
                .iter()
                .map(|x| 1.0 - (x - ChainPamdp::GOALS[i]).powi(2) + gamma * v_next)
                .fold(f64::NEG_INFINITY, f64::max);
            let v = best_move.max(ChainPamdp::STOP_REWARD);
            assert!((chain.v(&s).unwrap() - v).abs() < 1e-8);
            for &x in grid.iter().step_by(997) {
                let brute = 1.0 - (x - ChainPamdp::GOALS[i]).powi(2) + gamma * v_next;
                assert!((chain.q(&s, 0, x).unwrap() - brute).abs() < 1e-12);
            }
            v_next = v;
        }
        let bandit = oracle_q(&EnvSpec::Bandit, gamma).unwrap();
        for k in 0..2 {
            let brute = grid
                .iter()
                .map(|&x| ParamBandit::reward(k, x))
                .fold(f64::NEG_INFINITY, f64::max);
            let (x_star, q_star) = [(0.3, 1.0), (-0.5, 0.8)][k];
            assert!((brute - q_star).abs() < 1e-8);
            assert!((bandit.q(&[1.0], k, x_star).unwrap() - q_star).abs() < 1e-15);
        }
    }
}
