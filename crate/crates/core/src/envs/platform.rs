//! A one-dimensional platformer.
//!
//! The agent starts at `x = 0` and must reach `x ≥ L` across a row of
//! platforms separated by gaps. Every non-final platform has an enemy
//! patrolling it. One `step` executes one action to completion:
//!
//! * **run** moves along the ground and dies on contact with the local enemy
//!   or by running off the platform's right edge;
//! * **hop** arcs over enemies;
//! * **leap** arcs over enemies and gaps.
//!
//! Any action landing inside a gap dies. The reward is the progress made,
//! `Δx / L`, and 0 on death, so a successful episode returns exactly 1.

use serde::{Deserialize, Serialize};

use super::{check_params, Environment, Step};
use crate::error::{Error, Result};
use crate::policy::Passthrough;

pub const RUN: usize = 0;
pub const HOP: usize = 1;
pub const LEAP: usize = 2;

/// Geometry and physics. Displacement laws are `d = base + slope·p` with
/// `p ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformConfig {
    pub length: f64,
    pub platforms: Vec<(f64, f64)>,
    pub enemy_speed: f64,
    /// Distance between a platform's edges and its enemy's patrol range.
    pub enemy_inset: f64,
    pub run: (f64, f64),
    pub hop: (f64, f64),
    pub leap: (f64, f64),
}

impl Default for PlatformConfig {
    fn default() -> Self {
        Self {
            length: 100.0,
            platforms: vec![(0.0, 30.0), (38.0, 68.0), (74.0, 100.0)],
            enemy_speed: 1.0,
            enemy_inset: 2.0,
            run: (3.0, 12.0),
            hop: (5.0, 15.0),
            leap: (20.0, 15.0),
        }
    }
}

impl PlatformConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.length > 0.0 && self.length.is_finite()) {
            return bad(format!("platform length must be positive, got {}", self.length));
        }
        let Some(&(first, _)) = self.platforms.first() else {
            return bad("at least one platform is required".into());
        };
        if first != 0.0 {
            return bad(format!("the first platform must start at 0, got {first}"));
        }
        for &(a, b) in &self.platforms {
            if !(a.is_finite() && b.is_finite() && b > a) {
                return bad(format!("platform [{a}, {b}] is empty or non-finite"));
            }
        }
        for w in self.platforms.windows(2) {
            if !(w[1].0 > w[0].1) {
                return bad(format!(
                    "platforms [{}, {}] and [{}, {}] must be ordered with a gap of positive width",
                    w[0].0, w[0].1, w[1].0, w[1].1
                ));
            }
        }
        let last = self.platforms[self.platforms.len() - 1].1;
        if last != self.length {
            return bad(format!("the last platform must end at L = {}, got {last}", self.length));
        }
        if !(self.enemy_speed > 0.0 && self.enemy_speed.is_finite()) {
            return bad(format!("enemy speed must be positive, got {}", self.enemy_speed));
        }
        if !(self.enemy_inset >= 0.0) {
            return bad(format!("enemy inset must be non-negative, got {}", self.enemy_inset));
        }
        for &(a, b) in &self.platforms[..self.platforms.len() - 1] {
            if !(b - a > 2.0 * self.enemy_inset) {
                return bad(format!("platform [{a}, {b}] is too narrow for its patrol range"));
            }
        }
        for (name, (base, slope)) in [("run", self.run), ("hop", self.hop), ("leap", self.leap)] {
            if !(base > 0.0 && slope > 0.0 && base.is_finite() && slope.is_finite()) {
                return bad(format!(
                    "{name} displacement must be positive and increasing, got {base} + {slope}·p"
                ));
            }
        }
        Ok(())
    }

    fn law(&self, action: usize) -> (f64, f64) {
        [self.run, self.hop, self.leap][action]
    }

    pub fn displacement(&self, action: usize, p: f64) -> f64 {
        let (base, slope) = self.law(action);
        base + slope * p
    }

    fn max_displacement(&self) -> f64 {
        (0..3).map(|k| self.displacement(k, 1.0)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Enemy {
    position: f64,
    direction: f64,
    range: (f64, f64),
}

impl Enemy {
    /// Moves one patrol step and returns the interval swept on the way.
    fn advance(&mut self, speed: f64) -> (f64, f64) {
        let (lo, hi) = self.range;
        let start = self.position;
        let mut next = self.position + self.direction * speed;
        let mut swept = (start.min(next).max(lo), start.max(next).min(hi));
        // Reflect off the patrol endpoints; a range narrower than one step
        // may need several bounces.
        while next < lo || next > hi {
            if next < lo {
                next = 2.0 * lo - next;
                self.direction = 1.0;
            } else {
                next = 2.0 * hi - next;
                self.direction = -1.0;
            }
            swept = (swept.0.min(next), swept.1.max(next));
        }
        self.position = next;
        swept
    }
}

#[derive(Debug, Clone)]
pub struct Platform {
    config: PlatformConfig,
    x: f64,
    last_displacement: f64,
    enemies: Vec<Enemy>,
    done: bool,
}

impl Platform {
    pub const STATE_DIM: usize = 9;

    pub fn new(config: PlatformConfig) -> Result<Self> {
        config.validate()?;
        let mut env = Self {
            config,
            x: 0.0,
            last_displacement: 0.0,
            enemies: Vec::new(),
            done: false,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn config(&self) -> &PlatformConfig {
        &self.config
    }

    pub fn position(&self) -> f64 {
        self.x
    }

    pub fn enemy_positions(&self) -> Vec<f64> {
        self.enemies.iter().map(|e| e.position).collect()
    }

    /// Index of the last platform starting at or before `x`.
    fn platform_index(&self, x: f64) -> usize {
        self.config.platforms.iter().rposition(|&(a, _)| a <= x).unwrap_or(0)
    }

    fn in_gap(&self, x: f64) -> bool {
        self.config.platforms.windows(2).any(|w| x > w[0].1 && x < w[1].0)
    }

    fn observe(&self) -> Vec<f64> {
        let cfg = &self.config;
        let l = cfg.length;
        let i = self.platform_index(self.x);
        let (start, end) = cfg.platforms[i];
        let (gap, next_width) = match cfg.platforms.get(i + 1) {
            Some(&(a, b)) => (a - end, b - a),
            None => (0.0, 0.0),
        };
        let (enemy_rel, enemy_dir) = match self.enemies.get(i) {
            Some(e) => ((e.position - self.x) / l, e.direction),
            None => (1.0, 0.0),
        };
        [
            self.x / l,
            self.last_displacement / cfg.max_displacement(),
            enemy_rel,
            enemy_dir,
            start / l,
            (end - start) / l,
            gap / l,
            next_width / l,
            (end - self.x) / l,
        ]
        .into_iter()
        .map(|v| v.clamp(-1.0, 1.0))
        .collect()
    }
}

impl Environment for Platform {
    fn name(&self) -> &'static str {
        "platform"
    }

    fn state_dim(&self) -> usize {
        Self::STATE_DIM
    }

    fn param_dims(&self) -> Vec<usize> {
        vec![1, 1, 1]
    }

    fn native_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); 3]
    }

    /// The dynamics have no randomness, so every seed yields the same start.
    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        let cfg = &self.config;
        let n = cfg.platforms.len();
        self.enemies = cfg.platforms[..n - 1]
            .iter()
            .map(|&(a, b)| {
                let range = (a + cfg.enemy_inset, b - cfg.enemy_inset);
                Enemy {
                    position: range.1,
                    direction: -1.0,
                    range,
                }
            })
            .collect();
        self.x = 0.0;
        self.last_displacement = 0.0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: usize, params: &[f64]) -> Result<Step> {
        if self.done {
            return Err(Error::StepAfterTerminal);
        }
        check_params(&self.param_dims(), &self.native_bounds(), action, params)?;
        let cfg = &self.config;
        let d = cfg.displacement(action, params[0]);
        let from = self.x;
        let to = from + d;
        let i = self.platform_index(from);
        let edge = cfg.platforms[i].1;
        let is_final = i + 1 == cfg.platforms.len();

        let swept: Vec<(f64, f64)> = self.enemies.iter_mut().map(|e| e.advance(cfg.enemy_speed)).collect();

        let mut dead = self.in_gap(to);
        if action == RUN {
            dead |= !is_final && to > edge;
            if let Some(&(lo, hi)) = swept.get(i) {
                dead |= from <= hi && to >= lo;
            }
        }

        self.last_displacement = d;
        let step = if dead {
            self.x = to;
            self.done = true;
            Step {
                state: self.observe(),
                reward: 0.0,
                terminal: true,
            }
        } else {
            self.x = to.min(cfg.length);
            self.done = self.x >= cfg.length;
            Step {
                state: self.observe(),
                reward: (self.x - from) / cfg.length,
                terminal: self.done,
            }
        };
        Ok(step)
    }

    /// Constant mid-range parameters: scaled value 0 in every slot.
    fn default_passthrough(&self) -> Option<Passthrough> {
        Some(Passthrough::constant(Self::STATE_DIM, vec![0.0; 3]))
    }
}
