use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::domain::Scaling;
use crate::envs::{EnvOptions, EnvTag, Opponent};
use crate::estimators::{FitOptions, PolicyMode};
use crate::features::FeatureSpec;
use crate::{Error, Result};

/// What a sweep row measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelName {
    Rp,
    Po,
    /// Reward-prior fit, evaluated by re-solving the model with the learned reward.
    RpResolve,
    /// Uniform policy over legal actions; no learning.
    RandomBaseline,
}

impl ModelName {
    pub const ALL: [ModelName; 4] = [
        ModelName::Rp,
        ModelName::Po,
        ModelName::RpResolve,
        ModelName::RandomBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::Rp => "rp",
            ModelName::Po => "po",
            ModelName::RpResolve => "rp-resolve",
            ModelName::RandomBaseline => "random-baseline",
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model {s:?}")))
    }
}

/// Which opponent plays O while demonstrations are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoOpponent {
    Random,
    Minimax,
    /// The opponent named by the environment tag.
    Same,
}

impl DemoOpponent {
    pub fn resolve(self, evaluation: Opponent) -> Opponent {
        match self {
            DemoOpponent::Random => Opponent::Random,
            DemoOpponent::Minimax => Opponent::Minimax,
            DemoOpponent::Same => evaluation,
        }
    }
}

impl fmt::Display for DemoOpponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DemoOpponent::Random => "random",
            DemoOpponent::Minimax => "minimax",
            DemoOpponent::Same => "same",
        })
    }
}

impl FromStr for DemoOpponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(DemoOpponent::Random),
            "minimax" => Ok(DemoOpponent::Minimax),
            "same" => Ok(DemoOpponent::Same),
            other => Err(Error::Config(format!("unknown demo opponent {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvTag,
    pub models: Vec<ModelName>,
    /// Positive and strictly increasing.
    pub episodes: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    pub env_options: EnvOptions,
    /// Discount used by LSTDQ; defaults to the environment's.
    pub lstdq_gamma: Option<f64>,
    pub lstdq_ridge: Option<f64>,
    pub lstdq_include_terminal: bool,
    pub beta: f64,
    pub fit: FitOptions,
    pub scaling: Scaling,
    pub blackjack_extended: bool,
    pub eval_mode: PolicyMode,
    pub demo_opponent: DemoOpponent,
    /// Off by default so that results files are byte-reproducible.
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn new(env: EnvTag) -> Self {
        Self {
            env,
            models: ModelName::ALL.to_vec(),
            episodes: vec![10, 100, 1000, 10000],
            runs: if env == EnvTag::Gridworld32 { 10 } else { 200 },
            seed: 0,
            env_options: EnvOptions::default(),
            lstdq_gamma: None,
            lstdq_ridge: None,
            lstdq_include_terminal: true,
            beta: 1.0,
            fit: FitOptions::default(),
            scaling: Scaling::default(),
            blackjack_extended: false,
            eval_mode: PolicyMode::Greedy,
            demo_opponent: DemoOpponent::Same,
            record_timing: false,
        }
    }

    pub fn feature_spec(&self) -> FeatureSpec {
        FeatureSpec {
            env: self.env,
            scaling: self.scaling,
            blackjack_extended: self.blackjack_extended,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.models.is_empty() {
            return bad("no models selected".into());
        }
        if self.episodes.contains(&0) {
            return bad("episode counts must be positive".into());
        }
        if self.episodes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("episode counts must be strictly increasing".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad(format!("beta {} must be positive", self.beta));
        }
        if let Some(g) = self.lstdq_gamma {
            if !(0.0..=1.0).contains(&g) {
                return bad(format!("lstdq.gamma {g} outside [0, 1]"));
            }
        }
        if let Some(r) = self.lstdq_ridge {
            if !(r.is_finite() && r >= 0.0) {
                return bad(format!("lstdq.ridge {r} must be non-negative"));
            }
        }
        if !(self.fit.tol_grad > 0.0) || self.fit.max_iter == 0 {
            return bad("fit.tol_grad must be positive and fit.max_iter at least 1".into());
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
        }
        let gw = &mut self.env_options.gridworld;
        let ttt = &mut self.env_options.tictactoe;
        match key {
            "env" => self.env = value.parse()?,
            "model" | "models" | "fit.model" => self.models = parse_list(value, |v| v.parse())?,
            "episodes" => self.episodes = parse_list(value, |v| num(key, v))?,
            "runs" => self.runs = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "gamma" => self.env_options.discount = Some(num(key, value)?),
            "lstdq.gamma" => self.lstdq_gamma = Some(num(key, value)?),
            "lstdq.ridge" => {
                self.lstdq_ridge = if value == "auto" {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "lstdq.include_terminal" => self.lstdq_include_terminal = num(key, value)?,
            "fit.beta" | "beta" => self.beta = num(key, value)?,
            "fit.tol_grad" => self.fit.tol_grad = num(key, value)?,
            "fit.max_iter" => self.fit.max_iter = num(key, value)?,
            "fit.memory" => self.fit.memory = num(key, value)?,
            "features.scaling" => self.scaling = value.parse()?,
            "features.blackjack_extended" => self.blackjack_extended = num(key, value)?,
            "eval.mode" => self.eval_mode = value.parse()?,
            "record_timing" => self.record_timing = num(key, value)?,
            "gridworld.size" => gw.size = num(key, value)?,
            "gridworld.corner" => gw.corner = num(key, value)?,
            "gridworld.inside_reward" => gw.inside_reward = num(key, value)?,
            "gridworld.outside_reward" => gw.outside_reward = num(key, value)?,
            "gridworld.slip" => gw.slip = num(key, value)?,
            "gridworld.discount" => gw.discount = num(key, value)?,
            "gridworld.episode_steps" => gw.episode_steps = num(key, value)?,
            "tictactoe.win" => ttt.win = num(key, value)?,
            "tictactoe.loss" => ttt.loss = num(key, value)?,
            "tictactoe.draw" => ttt.draw = num(key, value)?,
            "tictactoe.demo_opponent" | "demo_opponent" => self.demo_opponent = value.parse()?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Every setting as `key = value` lines, readable by [`Self::apply_text`].
    pub fn echo(&self) -> String {
        let list = |xs: Vec<String>| xs.join(",");
        let opt = |x: Option<f64>| x.map_or("auto".to_string(), |v| format!("{v:?}"));
        let gw = &self.env_options.gridworld;
        let ttt = &self.env_options.tictactoe;
        let mut lines = vec![
            format!("env = {}", self.env),
            format!(
                "models = {}",
                list(self.models.iter().map(|m| m.to_string()).collect())
            ),
            format!(
                "episodes = {}",
                list(self.episodes.iter().map(|n| n.to_string()).collect())
            ),
            format!("runs = {}", self.runs),
            format!("seed = {}", self.seed),
        ];
        if let Some(g) = self.env_options.discount {
            lines.push(format!("gamma = {g:?}"));
        }
        if let Some(g) = self.lstdq_gamma {
            lines.push(format!("lstdq.gamma = {g:?}"));
        }
        lines.extend([
            format!("lstdq.ridge = {}", opt(self.lstdq_ridge)),
            format!("lstdq.include_terminal = {}", self.lstdq_include_terminal),
            format!("fit.beta = {:?}", self.beta),
            format!("fit.tol_grad = {:?}", self.fit.tol_grad),
            format!("fit.max_iter = {}", self.fit.max_iter),
            format!("fit.memory = {}", self.fit.memory),
            format!("features.scaling = {}", self.scaling),
            format!("features.blackjack_extended = {}", self.blackjack_extended),
            format!("eval.mode = {}", self.eval_mode),
            format!("record_timing = {}", self.record_timing),
            format!("gridworld.size = {}", gw.size),
            format!("gridworld.corner = {}", gw.corner),
            format!("gridworld.inside_reward = {:?}", gw.inside_reward),
            format!("gridworld.outside_reward = {:?}", gw.outside_reward),
            format!("gridworld.slip = {:?}", gw.slip),
            format!("gridworld.discount = {:?}", gw.discount),
            format!("gridworld.episode_steps = {}", gw.episode_steps),
            format!("tictactoe.win = {:?}", ttt.win),
            format!("tictactoe.loss = {:?}", ttt.loss),
            format!("tictactoe.draw = {:?}", ttt.draw),
            format!("tictactoe.demo_opponent = {}", self.demo_opponent),
        ]);
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(msg) => msg.clone(),
        other => other.to_string(),
    }
}

pub(crate) fn parse_list<T>(value: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(f)
        .collect()
}
