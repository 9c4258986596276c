use std::collections::BTreeMap;

use super::{ActionId, StateId};
use crate::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Legal action sets per state. Terminal states have an empty set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSets {
    n_actions: usize,
    sets: Vec<Vec<ActionId>>,
}

impl ActionSets {
    pub fn new(n_actions: usize, sets: Vec<Vec<ActionId>>) -> Self {
        debug_assert!(sets.iter().flatten().all(|&a| a < n_actions));
        Self { n_actions, sets }
    }

    pub fn n_states(&self) -> usize {
        self.sets.len()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn legal(&self, s: StateId) -> &[ActionId] {
        &self.sets[s]
    }

    pub fn is_legal(&self, s: StateId, a: ActionId) -> bool {
        self.sets.get(s).is_some_and(|set| set.contains(&a))
    }
}

/// Expected immediate reward and next-state distribution of one (state, action).
#[derive(Debug, Clone, PartialEq)]
pub struct ActionModel {
    pub reward: f64,
    /// Sorted by state, no duplicates.
    pub next: Vec<(StateId, f64)>,
}

impl ActionModel {
    /// Merges duplicate successors and sorts them.
    pub fn new(reward: f64, next: impl IntoIterator<Item = (StateId, f64)>) -> Self {
        let mut merged: BTreeMap<StateId, f64> = BTreeMap::new();
        for (s, p) in next {
            if p != 0.0 {
                *merged.entry(s).or_default() += p;
            }
        }
        Self {
            reward,
            next: merged.into_iter().collect(),
        }
    }

    pub fn expected(&self, values: &[f64]) -> f64 {
        self.next.iter().map(|&(s, p)| p * values[s]).sum()
    }
}

/// Exact tabular model. Terminal states are absorbing with zero reward and
/// carry no action models; every non-terminal state has at least one legal
/// action.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    models: Vec<Option<ActionModel>>,
    start: Vec<f64>,
    terminal: Vec<bool>,
    discount: f64,
    horizon: Option<usize>,
}

impl TabularMdp {
    /// `models` is indexed by `s * n_actions + a`; `None` marks an illegal action.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        models: Vec<Option<ActionModel>>,
        start: Vec<f64>,
        terminal: Vec<bool>,
        discount: f64,
    ) -> Result<Self> {
        let mdp = Self {
            n_states,
            n_actions,
            models,
            start,
            terminal,
            discount,
            horizon: None,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn with_horizon(mut self, horizon: Option<usize>) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_discount(mut self, discount: f64) -> Result<Self> {
        self.discount = discount;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.n_states == 0 || self.n_actions == 0 {
            return bad("empty state or action space".into());
        }
        if self.models.len() != self.n_states * self.n_actions
            || self.start.len() != self.n_states
            || self.terminal.len() != self.n_states
        {
            return bad("table sizes do not match n_states/n_actions".into());
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad(format!("discount {} outside (0, 1]", self.discount));
        }
        for s in 0..self.n_states {
            let mut any = false;
            for a in 0..self.n_actions {
                let Some(m) = self.model(s, a) else { continue };
                any = true;
                if self.terminal[s] {
                    return bad(format!("terminal state {s} has an action model"));
                }
                if !m.reward.is_finite() {
                    return bad(format!("non-finite reward at ({s}, {a})"));
                }
                let mut total = 0.0;
                for &(next, p) in &m.next {
                    if next >= self.n_states || !(p >= 0.0) {
                        return bad(format!("bad transition ({s}, {a}) -> ({next}, {p})"));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > STOCHASTIC_TOL {
                    return bad(format!("row ({s}, {a}) sums to {total}"));
                }
            }
            if !any && !self.terminal[s] {
                return bad(format!("non-terminal state {s} has no legal action"));
            }
        }
        let total: f64 = self.start.iter().sum();
        if (total - 1.0).abs() > STOCHASTIC_TOL || self.start.iter().any(|&p| !(p >= 0.0)) {
            return bad(format!("start distribution sums to {total}"));
        }
        if let Some(s) = (0..self.n_states).find(|&s| self.terminal[s] && self.start[s] != 0.0) {
            return bad(format!("terminal state {s} has start mass"));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s]
    }

    pub fn model(&self, s: StateId, a: ActionId) -> Option<&ActionModel> {
        self.models[s * self.n_actions + a].as_ref()
    }

    /// Legal actions with their models, in increasing action order.
    pub fn actions(&self, s: StateId) -> impl Iterator<Item = (ActionId, &ActionModel)> {
        let base = s * self.n_actions;
        self.models[base..base + self.n_actions]
            .iter()
            .enumerate()
            .filter_map(|(a, m)| m.as_ref().map(|m| (a, m)))
    }

    pub fn action_sets(&self) -> ActionSets {
        let sets = (0..self.n_states)
            .map(|s| self.actions(s).map(|(a, _)| a).collect())
            .collect();
        ActionSets::new(self.n_actions, sets)
    }

    /// Same dynamics with the reward of every legal action at `s` replaced by `reward[s]`.
    pub fn with_state_reward(&self, reward: &[f64]) -> Result<Self> {
        if reward.len() != self.n_states {
            return Err(Error::DimensionMismatch {
                expected: self.n_states,
                got: reward.len(),
            });
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("reward table"));
        }
        let mut out = self.clone();
        for (idx, m) in out.models.iter_mut().enumerate() {
            if let Some(m) = m {
                m.reward = reward[idx / self.n_actions];
            }
        }
        Ok(out)
    }
}
