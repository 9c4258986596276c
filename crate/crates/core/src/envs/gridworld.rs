use rand::{Rng, RngCore};

use super::{check_discount, check_state, EnvTag, Environment, EpisodeEnd, StepOutcome};
use crate::domain::{ActionId, ActionModel, StateId, TabularMdp};
use crate::{Error, Result};

pub const WEST: ActionId = 0;
pub const EAST: ActionId = 1;
pub const NORTH: ActionId = 2;
pub const SOUTH: ActionId = 3;
pub const STILL: ActionId = 4;
const N_ACTIONS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct GridworldConfig {
    pub size: usize,
    /// Side length of the two rewarding corner blocks.
    pub corner: usize,
    pub inside_reward: f64,
    pub outside_reward: f64,
    /// Probability that the chosen action is replaced by a uniform draw over all actions.
    pub slip: f64,
    pub discount: f64,
    pub episode_steps: usize,
}

impl Default for GridworldConfig {
    fn default() -> Self {
        Self {
            size: 32,
            corner: 8,
            inside_reward: 1.0,
            outside_reward: -1.0,
            slip: 0.3,
            discount: 0.95,
            episode_steps: 8,
        }
    }
}

/// Grid with two rewarding corner blocks (lower-left, upper-right) and a
/// penalty elsewhere. State `y * size + x`; north increases `y`.
#[derive(Debug, Clone)]
pub struct GridworldEnv {
    cfg: GridworldConfig,
}

impl GridworldEnv {
    pub fn new(cfg: GridworldConfig) -> Result<Self> {
        if cfg.size == 0 || 2 * cfg.corner > cfg.size {
            return Err(Error::Config(format!(
                "corner blocks of side {} do not fit a {} grid",
                cfg.corner, cfg.size
            )));
        }
        if !(0.0..=1.0).contains(&cfg.slip) {
            return Err(Error::Config(format!("slip {} outside [0, 1]", cfg.slip)));
        }
        if cfg.episode_steps == 0 {
            return Err(Error::Config("episode_steps must be positive".into()));
        }
        check_discount(cfg.discount)?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &GridworldConfig {
        &self.cfg
    }

    pub fn size(&self) -> usize {
        self.cfg.size
    }

    pub fn coords(&self, s: StateId) -> (usize, usize) {
        (s % self.cfg.size, s / self.cfg.size)
    }

    pub fn state(&self, x: usize, y: usize) -> StateId {
        y * self.cfg.size + x
    }

    pub fn in_corner(&self, s: StateId) -> bool {
        let (x, y) = self.coords(s);
        let (k, n) = (self.cfg.corner, self.cfg.size);
        (x < k && y < k) || (x >= n - k && y >= n - k)
    }

    pub fn reward(&self, s: StateId) -> f64 {
        if self.in_corner(s) {
            self.cfg.inside_reward
        } else {
            self.cfg.outside_reward
        }
    }

    /// Deterministic effect of an executed action; walls clamp.
    pub fn apply_move(&self, s: StateId, a: ActionId) -> StateId {
        let (x, y) = self.coords(s);
        let last = self.cfg.size - 1;
        let (x, y) = match a {
            WEST => (x.saturating_sub(1), y),
            EAST => ((x + 1).min(last), y),
            NORTH => (x, (y + 1).min(last)),
            SOUTH => (x, y.saturating_sub(1)),
            _ => (x, y),
        };
        self.state(x, y)
    }

    fn check(&self, s: StateId, a: ActionId) -> Result<()> {
        check_state(s, self.n_states())?;
        if a >= N_ACTIONS {
            return Err(Error::IllegalAction {
                state: s,
                action: a,
            });
        }
        Ok(())
    }
}

impl Environment for GridworldEnv {
    fn tag(&self) -> EnvTag {
        EnvTag::Gridworld32
    }

    fn n_states(&self) -> usize {
        self.cfg.size * self.cfg.size
    }

    fn n_actions(&self) -> usize {
        N_ACTIONS
    }

    fn is_terminal(&self, _: StateId) -> bool {
        false
    }

    fn legal_actions(&self, s: StateId) -> Result<Vec<ActionId>> {
        check_state(s, self.n_states())?;
        Ok((0..N_ACTIONS).collect())
    }

    fn reset(&self, rng: &mut dyn RngCore) -> StateId {
        rng.gen_range(0..self.n_states())
    }

    fn step(&self, s: StateId, a: ActionId, rng: &mut dyn RngCore) -> Result<StepOutcome> {
        self.check(s, a)?;
        let executed = if rng.gen::<f64>() < self.cfg.slip {
            rng.gen_range(0..N_ACTIONS)
        } else {
            a
        };
        Ok(StepOutcome {
            next: self.apply_move(s, executed),
            reward: self.reward(s),
            done: false,
        })
    }

    fn exact_model(&self) -> TabularMdp {
        let n = self.n_states();
        let slip = self.cfg.slip / N_ACTIONS as f64;
        let mut models = Vec::with_capacity(n * N_ACTIONS);
        for s in 0..n {
            for a in 0..N_ACTIONS {
                let intended = std::iter::once((self.apply_move(s, a), 1.0 - self.cfg.slip));
                let slipped = (0..N_ACTIONS).map(|b| (self.apply_move(s, b), slip));
                models.push(Some(ActionModel::new(
                    self.reward(s),
                    intended.chain(slipped),
                )));
            }
        }
        TabularMdp::new(
            n,
            N_ACTIONS,
            models,
            vec![1.0 / n as f64; n],
            vec![false; n],
            self.cfg.discount,
        )
        .expect("gridworld model is well formed")
    }

    fn episode_end(&self) -> EpisodeEnd {
        EpisodeEnd::Truncated {
            steps: self.cfg.episode_steps,
        }
    }
}
