//! Replay memory with FIFO eviction and uniform sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{discounted_returns, nstep_mixed_targets, BootstrapTarget};
use crate::error::{ensure_dim, Error, Result};
use crate::qfunction::ActionSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    /// Joint (scaled) parameter vector emitted at act time, noise included.
    pub params: Vec<f64>,
    /// Discrete-selection values `f_1..f_K` for the relaxed-action baseline;
    /// empty for the P-DQN family.
    pub scores: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    /// Discounted Monte Carlo return from this step, set at episode end.
    pub mc_return: Option<f64>,
    /// Mixed target as computed at episode end.
    pub mixed_target: Option<f64>,
}

impl Transition {
    pub fn new(
        state: Vec<f64>,
        action: usize,
        params: Vec<f64>,
        reward: f64,
        next_state: Vec<f64>,
        terminal: bool,
    ) -> Self {
        Self {
            state,
            action,
            params,
            scores: Vec::new(),
            reward,
            next_state,
            terminal,
            mc_return: None,
            mixed_target: None,
        }
    }

    pub fn with_scores(mut self, scores: Vec<f64>) -> Self {
        self.scores = scores;
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    space: ActionSpace,
    storage: Vec<Transition>,
    /// Slot the next push overwrites once full.
    cursor: usize,
}

impl ReplayBuffer {
    pub const PLATFORM_CAPACITY: usize = 10_000;

    pub fn new(capacity: usize, space: ActionSpace) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            space,
            storage: Vec::with_capacity(capacity.min(1 << 16)),
            cursor: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    fn validate(&self, t: &Transition) -> Result<()> {
        let sp = &self.space;
        ensure_dim("Transition state", sp.state_dim(), t.state.len())?;
        ensure_dim("Transition next_state", sp.state_dim(), t.next_state.len())?;
        ensure_dim("Transition params", sp.joint_dim(), t.params.len())?;
        if t.action >= sp.num_actions() {
            return Err(Error::InvalidArgument(format!(
                "transition action {} out of range",
                t.action
            )));
        }
        if !t.scores.is_empty() {
            ensure_dim("Transition scores", sp.num_actions(), t.scores.len())?;
        }
        if !sp.contains(&t.params) {
            return Err(Error::InvalidArgument("transition parameters outside bounds".into()));
        }
        let finite = t.reward.is_finite()
            && t.state
                .iter()
                .chain(&t.next_state)
                .chain(&t.scores)
                .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("Transition"));
        }
        Ok(())
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        self.validate(&t)?;
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    /// Stored transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.storage.len() < self.capacity {
            0
        } else {
            self.cursor
        };
        self.storage[split..].iter().chain(&self.storage[..split])
    }

    /// `batch` slot indices drawn uniformly with replacement. Since draws
    /// are with replacement, `batch` may exceed the number of stored
    /// transitions; only an empty buffer is an error.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.storage.is_empty() {
            return Err(Error::InsufficientSamples { have: 0, need: 1 });
        }
        let n = self.storage.len();
        Ok((0..batch).map(|_| rng.random_range(0..n)).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(batch, rng)?
            .into_iter()
            .map(|i| &self.storage[i])
            .collect())
    }

    /// Annotates a finished episode with Monte Carlo returns and mixed
    /// targets, then pushes every transition in order.
    pub fn finalize_episode<A: BootstrapTarget + ?Sized>(
        &mut self,
        mut episode: Vec<Transition>,
        agent: &A,
        beta: f64,
    ) -> Result<()> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidArgument(format!("mixing ratio {beta} outside [0, 1]")));
        }
        for t in &episode {
            self.validate(t)?;
        }
        if episode.is_empty() {
            return Ok(());
        }
        let rewards: Vec<f64> = episode.iter().map(|t| t.reward).collect();
        let refs: Vec<&Transition> = episode.iter().collect();
        let one_step = agent.one_step_targets(&refs)?;
        let mixed = nstep_mixed_targets(&one_step, &rewards, agent.gamma(), beta)?;
        let returns = discounted_returns(&rewards, agent.gamma());
        for ((t, m), g) in episode.iter_mut().zip(mixed).zip(returns) {
            t.mc_return = Some(g);
            t.mixed_target = Some(m);
        }
        for t in episode {
            self.push(t)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space() -> ActionSpace {
        ActionSpace::new(1, vec![1, 1]).unwrap()
    }

    fn tr(tag: f64) -> Transition {
        Transition::new(vec![tag], 0, vec![0.0, 0.0], tag, vec![tag], false)
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = ReplayBuffer::new(2, space()).unwrap();
        for tag in [1.0, 2.0, 3.0] {
            buf.push(tr(tag)).unwrap();
        }
        let held: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        assert_eq!(held, vec![2.0, 3.0]);
    }

    #[test]
    fn malformed_transitions_rejected() {
        let mut buf = ReplayBuffer::new(4, space()).unwrap();
        let mut t = tr(0.0);
        t.action = 2;
        assert!(buf.push(t).is_err());
        let mut t = tr(0.0);
        t.params = vec![1.5, 0.0];
        assert!(buf.push(t).is_err());
        let mut t = tr(0.0);
        t.state = vec![0.0, 0.0];
        assert!(buf.push(t).is_err());
        assert!(buf.push(tr(f64::NAN)).is_err());
        assert!(ReplayBuffer::new(0, space()).is_err());
    }

    #[test]
    fn sampling_degenerate_and_insufficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut buf = ReplayBuffer::new(4, space()).unwrap();
        assert!(matches!(
            buf.sample(1, &mut rng),
            Err(Error::InsufficientSamples { .. })
        ));
        buf.push(tr(7.0)).unwrap();
        let thrice = buf.sample(3, &mut rng).unwrap();
        assert!(thrice.iter().all(|t| t.reward == 7.0));
        assert_eq!(thrice.len(), 3);
        for _ in 0..10 {
            assert_eq!(buf.sample(1, &mut rng).unwrap()[0].reward, 7.0);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let mut buf = ReplayBuffer::new(50, space()).unwrap();
        for i in 0..50 {
            buf.push(tr(i as f64)).unwrap();
        }
        let a = buf.sample_indices(20, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = buf.sample_indices(20, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }
}
