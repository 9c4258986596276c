use rand::Rng;

use super::{ActionId, ActionSets, FeatureMap, StateId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    #[default]
    LowestId,
    HighestId,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ln Σ exp(x_i)` with max-subtraction.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn check_weights(features: &dyn FeatureMap, weights: &[f64]) -> Result<()> {
    if weights.len() != features.value_dim() {
        return Err(Error::DimensionMismatch {
            expected: features.value_dim(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("weights"));
    }
    Ok(())
}

/// Boltzmann probabilities over `legal` (same order) for scores `g_Q(s,a)ᵀw`.
pub fn softmax_policy_prob(
    weights: &[f64],
    beta: f64,
    features: &dyn FeatureMap,
    s: StateId,
    legal: &[ActionId],
) -> Result<Vec<f64>> {
    if legal.is_empty() {
        return Err(Error::EmptyLegalSet(s));
    }
    check_weights(features, weights)?;
    let scores: Vec<f64> = legal
        .iter()
        .map(|&a| beta * dot(&features.value_features(s, a), weights))
        .collect();
    let lse = log_sum_exp(&scores);
    Ok(scores.iter().map(|x| (x - lse).exp()).collect())
}

pub fn greedy_action(
    weights: &[f64],
    features: &dyn FeatureMap,
    s: StateId,
    legal: &[ActionId],
    tie_rule: TieRule,
) -> Result<ActionId> {
    if legal.is_empty() {
        return Err(Error::EmptyLegalSet(s));
    }
    check_weights(features, weights)?;
    let scored = legal
        .iter()
        .map(|&a| (a, dot(&features.value_features(s, a), weights)));
    Ok(argmax_with_ties(scored, tie_rule))
}

pub(crate) fn argmax_with_ties(
    scored: impl Iterator<Item = (ActionId, f64)>,
    tie_rule: TieRule,
) -> ActionId {
    let mut best: Option<(ActionId, f64)> = None;
    for (a, score) in scored {
        best = match best {
            None => Some((a, score)),
            Some((b, top)) => {
                let better = score > top
                    || (score == top
                        && match tie_rule {
                            TieRule::LowestId => a < b,
                            TieRule::HighestId => a > b,
                        });
                if better {
                    Some((a, score))
                } else {
                    Some((b, top))
                }
            }
        };
    }
    best.expect("non-empty").0
}

/// Per-state action distribution with explicit zeros on illegal actions.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn from_fn(
        actions: &ActionSets,
        mut f: impl FnMut(StateId, &[ActionId]) -> Vec<f64>,
    ) -> Self {
        let n_actions = actions.n_actions();
        let mut probs = vec![0.0; actions.n_states() * n_actions];
        for s in 0..actions.n_states() {
            let legal = actions.legal(s);
            if legal.is_empty() {
                continue;
            }
            let p = f(s, legal);
            debug_assert_eq!(p.len(), legal.len());
            for (&a, &pa) in legal.iter().zip(&p) {
                probs[s * n_actions + a] = pa;
            }
        }
        Self { n_actions, probs }
    }

    pub fn uniform(actions: &ActionSets) -> Self {
        Self::from_fn(actions, |_, legal| {
            vec![1.0 / legal.len() as f64; legal.len()]
        })
    }

    /// One action per state; `None` only for terminal states.
    pub fn deterministic(actions: &ActionSets, choice: &[Option<ActionId>]) -> Self {
        Self::from_fn(actions, |s, legal| {
            let chosen = choice[s].expect("action for non-terminal state");
            legal.iter().map(|&a| f64::from(a == chosen)).collect()
        })
    }

    /// Uniform over a per-state subset of actions.
    pub fn uniform_over(actions: &ActionSets, subsets: &[Vec<ActionId>]) -> Self {
        Self::from_fn(actions, |s, legal| {
            let k = subsets[s].len() as f64;
            legal
                .iter()
                .map(|a| if subsets[s].contains(a) { 1.0 / k } else { 0.0 })
                .collect()
        })
    }

    pub fn n_states(&self) -> usize {
        self.probs.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn probs(&self, s: StateId) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn prob(&self, s: StateId, a: ActionId) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn sample<R: Rng + ?Sized>(&self, s: StateId, rng: &mut R) -> ActionId {
        let probs = self.probs(s);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = None;
        for (a, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = Some(a);
                if u < acc {
                    return a;
                }
            }
        }
        last.expect("policy has support in every non-terminal state")
    }

    /// Probabilities non-negative, summing to one on legal actions, zero elsewhere.
    pub fn validate(&self, actions: &ActionSets) -> Result<()> {
        for s in 0..actions.n_states() {
            let legal = actions.legal(s);
            if legal.is_empty() {
                continue;
            }
            let mut total = 0.0;
            for (a, &p) in self.probs(s).iter().enumerate() {
                if !(p >= 0.0) || (p > 0.0 && !legal.contains(&a)) {
                    return Err(Error::InvalidModel(format!(
                        "bad probability {p} at ({s}, {a})"
                    )));
                }
                total += p;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "state {s} probabilities sum to {total}"
                )));
            }
        }
        Ok(())
    }
}

/// Boltzmann policy over linear values `g_Q(s,a)ᵀw`.
#[derive(Clone)]
pub struct SoftmaxPolicy<'a> {
    pub features: &'a dyn FeatureMap,
    pub weights: Vec<f64>,
    pub beta: f64,
}

impl SoftmaxPolicy<'_> {
    pub fn probs(&self, s: StateId, legal: &[ActionId]) -> Result<Vec<f64>> {
        softmax_policy_prob(&self.weights, self.beta, self.features, s, legal)
    }

    pub fn tabulate(&self, actions: &ActionSets) -> Result<TabularPolicy> {
        check_weights(self.features, &self.weights)?;
        Ok(TabularPolicy::from_fn(actions, |s, legal| {
            self.probs(s, legal).expect("checked above")
        }))
    }
}

pub enum Policy<'a> {
    Tabular(TabularPolicy),
    Softmax(SoftmaxPolicy<'a>),
}

impl Policy<'_> {
    pub fn probs(&self, s: StateId, legal: &[ActionId]) -> Result<Vec<f64>> {
        match self {
            Policy::Tabular(t) => Ok(legal.iter().map(|&a| t.prob(s, a)).collect()),
            Policy::Softmax(p) => p.probs(s, legal),
        }
    }

    pub fn to_tabular(&self, actions: &ActionSets) -> Result<TabularPolicy> {
        match self {
            Policy::Tabular(t) => Ok(t.clone()),
            Policy::Softmax(p) => p.tabulate(actions),
        }
    }
}
