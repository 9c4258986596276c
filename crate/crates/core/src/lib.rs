//! Model-free inverse reinforcement learning from demonstrations.
//!
//! Two maximum a posteriori estimators are provided. The reward-prior model
//! parametrises a linear reward and maps it to state-action values through an
//! LSTDQ system built from the demonstrations alone. The policy-optimality
//! model parametrises the state-action values directly. Both reduce to a
//! concave conditional-logit likelihood which is maximised with L-BFGS.
//!
//! The benchmark environments (blackjack, a 32x32 gridworld and tic-tac-toe)
//! double as samplers for demonstrations and as exact tabular models used by
//! the evaluation oracles. Estimators never see the tabular models.

pub mod domain;
pub mod envs;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod features;
pub mod harness;
pub mod lstdq;

pub use error::{Error, Result};
