//! Reinforcement learning over parameterised action spaces: every step picks
//! a discrete action `k` together with a continuous parameter vector `x_k`.
//!
//! The crate implements the P-DQN family, which pairs a Q-network over
//! `(s, x)` with a deterministic actor emitting every `x_k`, in three
//! Q-network layouts:
//!
//! * [`QVariant::Joint`](qfunction::QVariant): one network sees the whole
//!   joint parameter vector, so every `Q_k` depends on every `x_j`;
//! * [`QVariant::MultiPass`](qfunction::QVariant): the same network run once
//!   per action with all other blocks zeroed, batched as `K` rows;
//! * [`QVariant::Separate`](qfunction::QVariant): one network per action.
//!
//! plus a relaxed-action DDPG baseline ([`agent::PaddpgAgent`]).
//!
//! Modules, bottom-up: [`nn`] (dense nets, backprop, Adam), [`qfunction`],
//! [`policy`] (actor, noise, schedules), [`replay`], [`agent`], [`envs`] and
//! [`harness`].
//!
//! The runnable examples in `examples/` cover one capability each:
//!
//! | example | shows |
//! |---|---|
//! | `gradient_check` | backprop against central finite differences |
//! | `multipass_equivalence` | the batched pass equals K masked single passes |
//! | `false_gradients` | cross-action gradients per Q-network layout |
//! | `sensitivity_sweep` | an unrelated parameter flipping the greedy action |
//! | `bandit_oracle` | learning a parameterised bandit against its closed form |
//! | `platform_scripted` | the Platform environment under a hand-written policy |
//! | `train_platform` | training and evaluating agents on Platform |
//! | `experiment_harness` | config files, sweeps, CSV logs and summaries |

// `!(a >= b)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod policy;
pub mod qfunction;
pub mod replay;

pub use error::{Error, Result};
