use std::fmt::Write as _;
use std::str::FromStr;

use super::{ActionId, ActionSets, StateId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Step {
    pub state: StateId,
    pub action: ActionId,
}

impl Step {
    pub fn new(state: StateId, action: ActionId) -> Self {
        Self { state, action }
    }
}

/// A non-empty sequence of state-action pairs in temporal order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    steps: Vec<Step>,
}

impl Trajectory {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidDemonstration(
                "trajectory has no steps".into(),
            ));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// The learner's only input: demonstrated trajectories from one environment.
///
/// Serialized as a line-oriented text file:
///
/// ```text
/// env=blackjack episodes=2
/// 17:1
/// 3:0 45:1
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemonstrationSet {
    env: String,
    trajectories: Vec<Trajectory>,
}

impl DemonstrationSet {
    pub fn new(env: impl Into<String>, trajectories: Vec<Trajectory>) -> Result<Self> {
        let env = env.into();
        if env.is_empty() || env.chars().any(char::is_whitespace) {
            return Err(Error::InvalidDemonstration(format!(
                "bad environment tag {env:?}"
            )));
        }
        Ok(Self { env, trajectories })
    }

    pub fn env(&self) -> &str {
        &self.env
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn step_count(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    pub fn steps(&self) -> impl Iterator<Item = &Step> {
        self.trajectories.iter().flat_map(|t| t.steps.iter())
    }

    /// Fails with [`Error::NoDemonstrations`] when empty; fitting operations call this first.
    pub fn ensure_non_empty(&self) -> Result<()> {
        if self.trajectories.is_empty() {
            Err(Error::NoDemonstrations)
        } else {
            Ok(())
        }
    }

    /// Checks every step against the environment's state count and legal actions.
    pub fn validate(&self, actions: &ActionSets) -> Result<()> {
        for step in self.steps() {
            if step.state >= actions.n_states() {
                return Err(Error::StateOutOfRange {
                    state: step.state,
                    n_states: actions.n_states(),
                });
            }
            if !actions.is_legal(step.state, step.action) {
                return Err(Error::IllegalAction {
                    state: step.state,
                    action: step.action,
                });
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "env={} episodes={}", self.env, self.trajectories.len()).unwrap();
        for traj in &self.trajectories {
            for (i, step) in traj.steps.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write!(out, "{}:{}", step.state, step.action).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Parses the text format; blank input is an empty demonstration set.
    pub fn from_text(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::NoDemonstrations);
        }
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let (env, episodes) = parse_header(header)?;
        let mut trajectories = Vec::with_capacity(episodes);
        for (idx, line) in lines {
            let lineno = idx + 1;
            let steps = line
                .split(' ')
                .map(|tok| {
                    parse_step(tok).ok_or_else(|| Error::Parse {
                        line: lineno,
                        msg: format!("bad step {tok:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let traj = Trajectory::new(steps).map_err(|_| Error::Parse {
                line: lineno,
                msg: "empty episode".into(),
            })?;
            trajectories.push(traj);
        }
        if trajectories.len() != episodes {
            return Err(Error::Parse {
                line: 1,
                msg: format!(
                    "header declares {episodes} episodes, found {}",
                    trajectories.len()
                ),
            });
        }
        Self::new(env, trajectories)
    }

    pub fn read(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn parse_header(header: &str) -> Result<(String, usize)> {
    let bad = |msg: &str| Error::Parse {
        line: 1,
        msg: msg.to_string(),
    };
    let mut parts = header.split(' ');
    let env = parts
        .next()
        .and_then(|p| p.strip_prefix("env="))
        .ok_or_else(|| bad("expected env=<tag>"))?;
    let episodes = parts
        .next()
        .and_then(|p| p.strip_prefix("episodes="))
        .and_then(|n| usize::from_str(n).ok())
        .ok_or_else(|| bad("expected episodes=<n>"))?;
    if parts.next().is_some() {
        return Err(bad("trailing header fields"));
    }
    Ok((env.to_string(), episodes))
}

fn parse_step(tok: &str) -> Option<Step> {
    let (s, a) = tok.split_once(':')?;
    Some(Step::new(parse_index(s)?, parse_index(a)?))
}

// Canonical decimal only, so that parsing and printing are inverse.
fn parse_index(s: &str) -> Option<usize> {
    if s.is_empty() || (s.len() > 1 && s.starts_with('0')) || !s.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    s.parse().ok()
}
