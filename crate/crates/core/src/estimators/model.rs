use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::lbfgs::{maximize, FitOptions, FitReport};
use super::objective::{ChoiceSet, ConditionalLogit, Objective};
use crate::domain::{
    greedy_action, softmax_policy_prob, ActionSets, DemonstrationSet, FeatureMap, StateId,
    TabularPolicy, TieRule,
};
use crate::lstdq::{LstdqOptions, LstdqSystem};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Rp,
    Po,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Rp => "rp",
            ModelKind::Po => "po",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rp" => Ok(ModelKind::Rp),
            "po" => Ok(ModelKind::Po),
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpParams {
    pub w_r: Vec<f64>,
    pub beta: f64,
    pub system: LstdqSystem,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoParams {
    pub w_q: Vec<f64>,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Rp(RpParams),
    Po(PoParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolicyMode {
    Softmax,
    #[default]
    Greedy,
}

impl fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyMode::Softmax => "softmax",
            PolicyMode::Greedy => "greedy",
        })
    }
}

impl FromStr for PolicyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" => Ok(PolicyMode::Softmax),
            "greedy" => Ok(PolicyMode::Greedy),
            other => Err(Error::Config(format!("unknown policy mode {other:?}"))),
        }
    }
}

fn finite(w: &[f64]) -> Result<()> {
    if w.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("fitted weights"))
    }
}

/// Fits the reward-prior model: builds and solves the LSTDQ system, then
/// maximises the likelihood over `w_R` from zero.
pub fn fit_rp(
    demos: &DemonstrationSet,
    features: &dyn FeatureMap,
    actions: &ActionSets,
    lstdq: &LstdqOptions,
    beta: f64,
    options: &FitOptions,
) -> Result<(RpParams, FitReport)> {
    let choices = ChoiceSet::from_demos(demos, actions)?;
    let system = LstdqSystem::from_demos(demos, features, lstdq)?;
    let objective = ConditionalLogit::rp(&choices, &system, features, beta)?;
    let (w_r, report) = maximize(&objective, vec![0.0; objective.dim()], options);
    finite(&w_r)?;
    Ok((RpParams { w_r, beta, system }, report))
}

/// Fits the policy-optimality model from `w_Q = 0`.
pub fn fit_po(
    demos: &DemonstrationSet,
    features: &dyn FeatureMap,
    actions: &ActionSets,
    beta: f64,
    options: &FitOptions,
) -> Result<(PoParams, FitReport)> {
    let choices = ChoiceSet::from_demos(demos, actions)?;
    let objective = ConditionalLogit::po(&choices, features, beta)?;
    let (w_q, report) = maximize(&objective, vec![0.0; objective.dim()], options);
    finite(&w_q)?;
    Ok((PoParams { w_q, beta }, report))
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Rp(_) => ModelKind::Rp,
            FittedModel::Po(_) => ModelKind::Po,
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            FittedModel::Rp(p) => p.beta,
            FittedModel::Po(p) => p.beta,
        }
    }

    /// The fitted parameter vector: `w_R` or `w_Q`.
    pub fn weights(&self) -> &[f64] {
        match self {
            FittedModel::Rp(p) => &p.w_r,
            FittedModel::Po(p) => &p.w_q,
        }
    }

    /// Value weights scoring state-action pairs: `C w_R` or `w_Q`.
    pub fn value_weights(&self) -> Result<Vec<f64>> {
        match self {
            FittedModel::Rp(p) => p.system.q_weights(&p.w_r),
            FittedModel::Po(p) => Ok(p.w_q.clone()),
        }
    }
}

/// Tabulates the fitted policy over every non-terminal state.
pub fn extract_policy(
    model: &FittedModel,
    features: &dyn FeatureMap,
    actions: &ActionSets,
    mode: PolicyMode,
) -> Result<TabularPolicy> {
    let w = model.value_weights()?;
    if w.len() != features.value_dim() {
        return Err(Error::DimensionMismatch {
            expected: features.value_dim(),
            got: w.len(),
        });
    }
    finite(&w)?;
    let beta = model.beta();
    let mut failure = None;
    let policy = TabularPolicy::from_fn(actions, |s, legal| {
        let probs = match mode {
            PolicyMode::Softmax => softmax_policy_prob(&w, beta, features, s, legal),
            PolicyMode::Greedy => {
                greedy_action(&w, features, s, legal, TieRule::LowestId).map(|a| {
                    legal
                        .iter()
                        .map(|&b| if a == b { 1.0 } else { 0.0 })
                        .collect()
                })
            }
        };
        probs.unwrap_or_else(|e| {
            failure.get_or_insert(e);
            vec![1.0 / legal.len() as f64; legal.len()]
        })
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(policy),
    }
}

/// `ρ̂(s) = g_R(s)ᵀ w_R` for every state; the PO model has no reward.
pub fn learned_reward(
    model: &FittedModel,
    features: &dyn FeatureMap,
    n_states: usize,
) -> Result<Vec<f64>> {
    let FittedModel::Rp(p) = model else {
        return Err(Error::NoRewardFunction);
    };
    if p.w_r.len() != features.reward_dim() {
        return Err(Error::DimensionMismatch {
            expected: features.reward_dim(),
            got: p.w_r.len(),
        });
    }
    Ok((0..n_states as StateId)
        .map(|s| {
            features
                .reward_features(s)
                .iter()
                .zip(&p.w_r)
                .map(|(g, w)| g * w)
                .sum()
        })
        .collect())
}

/// Parsed contents of a parameter file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamsFile {
    pub kind: ModelKind,
    pub beta: f64,
    pub weights: Vec<f64>,
}

impl ParamsFile {
    pub fn from_model(model: &FittedModel) -> Self {
        Self {
            kind: model.kind(),
            beta: model.beta(),
            weights: model.weights().to_vec(),
        }
    }

    /// Header `model=<rp|po> beta=<β> dim=<n>`, then one weight per line in
    /// shortest round-trip decimal form.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "model={} beta={:?} dim={}\n",
            self.kind,
            self.beta,
            self.weights.len()
        );
        for w in &self.weights {
            out.push_str(&format!("{w:?}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let parse_err = |line: usize, msg: String| Error::Parse { line, msg };
        let (mut kind, mut beta, mut dim) = (None, None, None);
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| parse_err(1, format!("malformed header field {field:?}")))?;
            match key {
                "model" => {
                    kind = Some(
                        value
                            .parse::<ModelKind>()
                            .map_err(|e| parse_err(1, e.to_string()))?,
                    )
                }
                "beta" => {
                    beta = Some(
                        value
                            .parse::<f64>()
                            .map_err(|e| parse_err(1, e.to_string()))?,
                    )
                }
                "dim" => {
                    dim = Some(
                        value
                            .parse::<usize>()
                            .map_err(|e| parse_err(1, e.to_string()))?,
                    )
                }
                other => return Err(parse_err(1, format!("unknown header field {other:?}"))),
            }
        }
        let (Some(kind), Some(beta), Some(dim)) = (kind, beta, dim) else {
            return Err(parse_err(1, "header needs model, beta and dim".into()));
        };
        let weights = lines
            .map(|(i, l)| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(i + 1, format!("{e}: {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if weights.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: weights.len(),
            });
        }
        Ok(Self {
            kind,
            beta,
            weights,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
