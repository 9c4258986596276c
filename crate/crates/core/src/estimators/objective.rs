use std::collections::BTreeMap;
use std::sync::Arc;

use crate::domain::{log_sum_exp, ActionId, ActionSets, DemonstrationSet, FeatureMap, StateId};
use crate::lstdq::LstdqSystem;
use crate::{Error, Result};

/// A differentiable function to maximise.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>);
}

/// Additive log-prior term `ln p(w)` with its gradient.
pub trait LogPrior: Send + Sync {
    fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>);
}

/// Demonstrated choices grouped by state: how often each legal action was taken.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceSet {
    states: Vec<StateChoices>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateChoices {
    pub state: StateId,
    pub legal: Vec<ActionId>,
    /// Aligned with `legal`.
    pub counts: Vec<u64>,
}

impl ChoiceSet {
    pub fn from_demos(demos: &DemonstrationSet, actions: &ActionSets) -> Result<Self> {
        demos.ensure_non_empty()?;
        demos.validate(actions)?;
        let mut counts: BTreeMap<StateId, BTreeMap<ActionId, u64>> = BTreeMap::new();
        for st in demos.steps() {
            *counts
                .entry(st.state)
                .or_default()
                .entry(st.action)
                .or_default() += 1;
        }
        let states = counts
            .into_iter()
            .map(|(s, by_action)| {
                let legal = actions.legal(s).to_vec();
                let counts = legal
                    .iter()
                    .map(|a| by_action.get(a).copied().unwrap_or(0))
                    .collect();
                StateChoices {
                    state: s,
                    legal,
                    counts,
                }
            })
            .collect();
        Ok(Self { states })
    }

    pub fn states(&self) -> &[StateChoices] {
        &self.states
    }

    pub fn step_count(&self) -> u64 {
        self.states.iter().flat_map(|c| &c.counts).sum()
    }
}

/// `L(w) = Σ_t [β φ(s_t,a_t)ᵀw − ln Σ_{a′ legal} exp(β φ(s_t,a′)ᵀw)]` plus an
/// optional log-prior, evaluated over the grouped demonstrated choices.
#[derive(Clone)]
pub struct ConditionalLogit {
    dim: usize,
    beta: f64,
    /// `(first row, number of legal actions)` per visited state.
    blocks: Vec<(usize, usize)>,
    /// One row of `phi` per (visited state, legal action).
    phi: Vec<f64>,
    counts: Vec<f64>,
    prior: Option<Arc<dyn LogPrior>>,
}

impl ConditionalLogit {
    /// Builds the objective from an arbitrary choice feature map `φ(s, a)`.
    pub fn new(
        choices: &ChoiceSet,
        dim: usize,
        beta: f64,
        mut phi: impl FnMut(StateId, ActionId) -> Result<Vec<f64>>,
    ) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::Config(format!(
                "beta {beta} must be finite and non-negative"
            )));
        }
        let mut blocks = Vec::with_capacity(choices.states.len());
        let mut rows = Vec::new();
        let mut counts = Vec::new();
        for c in &choices.states {
            if c.legal.is_empty() {
                return Err(Error::EmptyLegalSet(c.state));
            }
            blocks.push((counts.len(), c.legal.len()));
            for (&a, &n) in c.legal.iter().zip(&c.counts) {
                let v = phi(c.state, a)?;
                if v.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("features"));
                }
                rows.extend(v);
                counts.push(n as f64);
            }
        }
        Ok(Self {
            dim,
            beta,
            blocks,
            phi: rows,
            counts,
            prior: None,
        })
    }

    /// Policy-optimality objective: `φ = g_Q`.
    pub fn po(choices: &ChoiceSet, features: &dyn FeatureMap, beta: f64) -> Result<Self> {
        Self::new(choices, features.value_dim(), beta, |s, a| {
            Ok(features.value_features(s, a))
        })
    }

    /// Reward-prior objective: `φ = Cᵀ g_Q` for the solved LSTDQ map `C`.
    pub fn rp(
        choices: &ChoiceSet,
        system: &LstdqSystem,
        features: &dyn FeatureMap,
        beta: f64,
    ) -> Result<Self> {
        if system.value_dim() != features.value_dim() {
            return Err(Error::DimensionMismatch {
                expected: features.value_dim(),
                got: system.value_dim(),
            });
        }
        Self::new(choices, system.reward_dim(), beta, |s, a| {
            system.project(&features.value_features(s, a))
        })
    }

    pub fn with_prior(mut self, prior: Arc<dyn LogPrior>) -> Self {
        self.prior = Some(prior);
        self
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.phi[i * self.dim..(i + 1) * self.dim]
    }
}

impl Objective for ConditionalLogit {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(w.len(), self.dim, "weight dimension");
        let mut value = 0.0;
        let mut grad = vec![0.0; self.dim];
        let mut scores = Vec::new();
        for &(start, len) in &self.blocks {
            scores.clear();
            scores.extend(
                (start..start + len).map(|i| {
                    self.beta * self.row(i).iter().zip(w).map(|(x, y)| x * y).sum::<f64>()
                }),
            );
            let lse = log_sum_exp(&scores);
            let total: f64 = self.counts[start..start + len].iter().sum();
            for (k, &score) in scores.iter().enumerate() {
                let i = start + k;
                let n = self.counts[i];
                if n > 0.0 {
                    value += n * (score - lse);
                }
                let coeff = self.beta * (n - total * (score - lse).exp());
                if coeff != 0.0 {
                    for (g, x) in grad.iter_mut().zip(self.row(i)) {
                        *g += coeff * x;
                    }
                }
            }
        }
        if let Some(prior) = &self.prior {
            let (pv, pg) = prior.value_and_gradient(w);
            value += pv;
            for (g, p) in grad.iter_mut().zip(pg) {
                *g += p;
            }
        }
        (value, grad)
    }
}

/// Reward-prior log-likelihood and gradient at `w_r`.
pub fn rp_objective_and_gradient(
    w_r: &[f64],
    demos: &DemonstrationSet,
    actions: &ActionSets,
    system: &LstdqSystem,
    features: &dyn FeatureMap,
    beta: f64,
) -> Result<(f64, Vec<f64>)> {
    check_len(w_r, system.reward_dim())?;
    let choices = ChoiceSet::from_demos(demos, actions)?;
    Ok(ConditionalLogit::rp(&choices, system, features, beta)?.value_and_gradient(w_r))
}

/// Policy-optimality log-likelihood and gradient at `w_q`.
pub fn po_objective_and_gradient(
    w_q: &[f64],
    demos: &DemonstrationSet,
    actions: &ActionSets,
    features: &dyn FeatureMap,
    beta: f64,
) -> Result<(f64, Vec<f64>)> {
    check_len(w_q, features.value_dim())?;
    let choices = ChoiceSet::from_demos(demos, actions)?;
    Ok(ConditionalLogit::po(&choices, features, beta)?.value_and_gradient(w_q))
}

fn check_len(w: &[f64], dim: usize) -> Result<()> {
    if w.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: w.len(),
        });
    }
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("weights"));
    }
    Ok(())
}
