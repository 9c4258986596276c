//! Benchmark environments: samplers for demonstrations plus exact tabular
//! models for experts and evaluation.

pub mod blackjack;
pub mod gridworld;
pub mod tictactoe;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;

pub use blackjack::{BlackjackEnv, BlackjackState, Deal};
pub use gridworld::{GridworldConfig, GridworldEnv};
pub use tictactoe::{Board, Opponent, TicTacToeEnv, TicTacToeRewards};

use crate::domain::{ActionId, ActionSets, StateId, TabularMdp};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next: StateId,
    pub reward: f64,
    pub done: bool,
}

/// How demonstrated episodes end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeEnd {
    /// The last action of every episode leads to a terminal state.
    Terminal,
    /// Episodes are cut after a fixed number of steps.
    Truncated { steps: usize },
}

pub trait Environment: Send + Sync {
    fn tag(&self) -> EnvTag;
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn is_terminal(&self, s: StateId) -> bool;
    /// Fails for terminal or out-of-range states.
    fn legal_actions(&self, s: StateId) -> Result<Vec<ActionId>>;
    /// Samples a state from the start distribution.
    fn reset(&self, rng: &mut dyn RngCore) -> StateId;
    fn step(&self, s: StateId, a: ActionId, rng: &mut dyn RngCore) -> Result<StepOutcome>;
    fn exact_model(&self) -> TabularMdp;
    fn episode_end(&self) -> EpisodeEnd;

    fn action_sets(&self) -> ActionSets {
        let sets = (0..self.n_states())
            .map(|s| {
                if self.is_terminal(s) {
                    Vec::new()
                } else {
                    self.legal_actions(s).expect("non-terminal state")
                }
            })
            .collect();
        ActionSets::new(self.n_actions(), sets)
    }
}

pub(crate) fn check_state(s: StateId, n_states: usize) -> Result<()> {
    if s >= n_states {
        Err(Error::StateOutOfRange { state: s, n_states })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvTag {
    Blackjack,
    Gridworld32,
    TicTacToe(OpponentKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpponentKind {
    Random,
    Minimax,
}

impl EnvTag {
    /// Tag with `:` replaced, usable as a directory name.
    pub fn path_name(self) -> String {
        self.to_string().replace(':', "-")
    }
}

impl fmt::Display for EnvTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvTag::Blackjack => "blackjack",
            EnvTag::Gridworld32 => "gridworld32",
            EnvTag::TicTacToe(OpponentKind::Random) => "tictactoe:random",
            EnvTag::TicTacToe(OpponentKind::Minimax) => "tictactoe:minimax",
        })
    }
}

impl FromStr for EnvTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blackjack" => Ok(EnvTag::Blackjack),
            "gridworld32" => Ok(EnvTag::Gridworld32),
            "tictactoe:random" => Ok(EnvTag::TicTacToe(OpponentKind::Random)),
            "tictactoe:minimax" => Ok(EnvTag::TicTacToe(OpponentKind::Minimax)),
            other => Err(Error::Config(format!("unknown environment {other:?}"))),
        }
    }
}

/// Overrides applied when building an environment from its tag.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnvOptions {
    pub gridworld: GridworldConfig,
    pub tictactoe: TicTacToeRewards,
    /// Replaces the environment's default discount when set.
    pub discount: Option<f64>,
}

/// One of the benchmark environments, chosen by tag.
#[derive(Debug, Clone)]
pub enum AnyEnv {
    Blackjack(BlackjackEnv),
    Gridworld(GridworldEnv),
    TicTacToe(TicTacToeEnv),
}

impl AnyEnv {
    pub fn as_env(&self) -> &dyn Environment {
        match self {
            AnyEnv::Blackjack(e) => e,
            AnyEnv::Gridworld(e) => e,
            AnyEnv::TicTacToe(e) => e,
        }
    }
}

impl Environment for AnyEnv {
    fn tag(&self) -> EnvTag {
        self.as_env().tag()
    }
    fn n_states(&self) -> usize {
        self.as_env().n_states()
    }
    fn n_actions(&self) -> usize {
        self.as_env().n_actions()
    }
    fn is_terminal(&self, s: StateId) -> bool {
        self.as_env().is_terminal(s)
    }
    fn legal_actions(&self, s: StateId) -> Result<Vec<ActionId>> {
        self.as_env().legal_actions(s)
    }
    fn reset(&self, rng: &mut dyn RngCore) -> StateId {
        self.as_env().reset(rng)
    }
    fn step(&self, s: StateId, a: ActionId, rng: &mut dyn RngCore) -> Result<StepOutcome> {
        self.as_env().step(s, a, rng)
    }
    fn exact_model(&self) -> TabularMdp {
        self.as_env().exact_model()
    }
    fn episode_end(&self) -> EpisodeEnd {
        self.as_env().episode_end()
    }
}

pub fn make_env(tag: EnvTag, options: &EnvOptions) -> Result<AnyEnv> {
    Ok(match tag {
        EnvTag::Blackjack => {
            let mut env = BlackjackEnv::new();
            if let Some(g) = options.discount {
                env = env.with_discount(g)?;
            }
            AnyEnv::Blackjack(env)
        }
        EnvTag::Gridworld32 => {
            let mut cfg = options.gridworld.clone();
            if let Some(g) = options.discount {
                cfg.discount = g;
            }
            AnyEnv::Gridworld(GridworldEnv::new(cfg)?)
        }
        EnvTag::TicTacToe(kind) => {
            let opponent = match kind {
                OpponentKind::Random => Opponent::Random,
                OpponentKind::Minimax => Opponent::Minimax,
            };
            let mut env = TicTacToeEnv::new(opponent, options.tictactoe);
            if let Some(g) = options.discount {
                env = env.with_discount(g)?;
            }
            AnyEnv::TicTacToe(env)
        }
    })
}

pub(crate) fn check_discount(g: f64) -> Result<f64> {
    if g > 0.0 && g <= 1.0 {
        Ok(g)
    } else {
        Err(Error::Config(format!("discount {g} outside (0, 1]")))
    }
}
