use std::fmt;
use std::str::FromStr;

use super::{ActionId, StateId};
use crate::Error;

/// The pair of maps `g_R` (state to reward features) and `g_Q` (state-action
/// to value features).
pub trait FeatureMap: Send + Sync {
    fn reward_dim(&self) -> usize;
    fn value_dim(&self) -> usize;
    fn reward_features(&self, s: StateId) -> Vec<f64>;
    fn value_features(&self, s: StateId, a: ActionId) -> Vec<f64>;
}

/// Feature map backed by explicit tables, handy for small synthetic problems.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitFeatures {
    n_actions: usize,
    reward: Vec<Vec<f64>>,
    value: Vec<Vec<f64>>,
}

impl ExplicitFeatures {
    /// `reward[s]` is `g_R(s)`; `value[s * n_actions + a]` is `g_Q(s, a)`.
    pub fn new(
        n_actions: usize,
        reward: Vec<Vec<f64>>,
        value: Vec<Vec<f64>>,
    ) -> crate::Result<Self> {
        let bad_dim = |rows: &[Vec<f64>]| {
            let d = rows.first().map_or(0, Vec::len);
            rows.iter().find(|r| r.len() != d).map(|r| (d, r.len()))
        };
        if value.len() != reward.len() * n_actions {
            return Err(Error::DimensionMismatch {
                expected: reward.len() * n_actions,
                got: value.len(),
            });
        }
        if let Some((expected, got)) = bad_dim(&reward).or_else(|| bad_dim(&value)) {
            return Err(Error::DimensionMismatch { expected, got });
        }
        Ok(Self {
            n_actions,
            reward,
            value,
        })
    }

    /// Indicator features: `g_R(s) = e_s` and `g_Q(s, a) = e_{s * n_actions + a}`.
    pub fn tabular(n_states: usize, n_actions: usize) -> Self {
        let unit = |n: usize, i: usize| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            v
        };
        Self {
            n_actions,
            reward: (0..n_states).map(|s| unit(n_states, s)).collect(),
            value: (0..n_states * n_actions)
                .map(|i| unit(n_states * n_actions, i))
                .collect(),
        }
    }
}

impl FeatureMap for ExplicitFeatures {
    fn reward_dim(&self) -> usize {
        self.reward.first().map_or(0, Vec::len)
    }

    fn value_dim(&self) -> usize {
        self.value.first().map_or(0, Vec::len)
    }

    fn reward_features(&self, s: StateId) -> Vec<f64> {
        self.reward[s].clone()
    }

    fn value_features(&self, s: StateId, a: ActionId) -> Vec<f64> {
        self.value[s * self.n_actions + a].clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scaling {
    /// Each component mapped into `[0, 1]`.
    #[default]
    UnitInterval,
    /// Each component mapped into `[-1, 1]`.
    Symmetric,
    None,
}

impl Scaling {
    pub fn range(self) -> Option<(f64, f64)> {
        match self {
            Scaling::UnitInterval => Some((0.0, 1.0)),
            Scaling::Symmetric => Some((-1.0, 1.0)),
            Scaling::None => None,
        }
    }
}

impl fmt::Display for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scaling::UnitInterval => "unit",
            Scaling::Symmetric => "symmetric",
            Scaling::None => "none",
        })
    }
}

impl FromStr for Scaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unit" | "unit_interval" | "0,1" => Ok(Scaling::UnitInterval),
            "symmetric" | "-1,1" => Ok(Scaling::Symmetric),
            "none" => Ok(Scaling::None),
            other => Err(Error::Config(format!("unknown scaling {other:?}"))),
        }
    }
}
