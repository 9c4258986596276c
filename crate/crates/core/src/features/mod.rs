//! Reward and value feature constructions for the benchmark environments,
//! tabulated once over the full state space and scaled per component.

mod blackjack;
mod gridworld;
mod scaling;
mod tictactoe;

use std::path::Path;

pub use blackjack::blackjack_reward_features;
pub use gridworld::gridworld_reward_features;
pub use scaling::Scaler;
pub use tictactoe::{base_features as tictactoe_base_features, tictactoe_reward_features};

use crate::domain::{ActionId, FeatureMap, Scaling, StateId};
use crate::envs::{AnyEnv, EnvTag, Environment, TicTacToeEnv};
use crate::{Error, Result};

/// Which basis to build and how to scale it.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub env: EnvTag,
    pub scaling: Scaling,
    /// Adds four terms to the ten-term blackjack basis.
    pub blackjack_extended: bool,
}

impl FeatureSpec {
    pub fn new(env: EnvTag) -> Self {
        Self {
            env,
            scaling: Scaling::default(),
            blackjack_extended: false,
        }
    }

    /// Value features repeat the reward features in one block per action.
    pub fn replicated(&self) -> bool {
        !self.afterstate()
    }

    /// Value features are the reward features of the position after the move.
    pub fn afterstate(&self) -> bool {
        matches!(self.env, EnvTag::TicTacToe(_))
    }
}

#[derive(Debug, Clone)]
enum ValueLayout {
    Replicated,
    Afterstate {
        /// One scaled row per distinct afterstate.
        rows: Vec<f64>,
        /// `s * n_actions + a` to a row of `rows`, `u32::MAX` when illegal.
        index: Vec<u32>,
    },
}

const NO_ROW: u32 = u32::MAX;

/// Precomputed, scaled feature tables for one environment.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    spec: FeatureSpec,
    n_states: usize,
    n_actions: usize,
    reward_dim: usize,
    reward: Vec<f64>,
    value: ValueLayout,
    names: Vec<String>,
    terminal: Vec<bool>,
}

impl FeatureTable {
    pub fn build(env: &AnyEnv, spec: &FeatureSpec) -> Result<Self> {
        if env.tag() != spec.env {
            return Err(Error::Config(format!(
                "feature spec for {} used with environment {}",
                spec.env,
                env.tag()
            )));
        }
        match env {
            AnyEnv::Blackjack(e) => Ok(Self::replicated(
                e,
                spec,
                |s| blackjack_reward_features(s, spec.blackjack_extended),
                blackjack_names(spec.blackjack_extended),
                &[0],
            )),
            AnyEnv::Gridworld(e) => Ok(Self::replicated(
                e,
                spec,
                |s| gridworld_reward_features(e, s),
                gridworld::names(e.size()),
                &[],
            )),
            AnyEnv::TicTacToe(e) => Self::afterstates(e, spec),
        }
    }

    fn replicated(
        env: &dyn Environment,
        spec: &FeatureSpec,
        raw: impl Fn(StateId) -> Vec<f64>,
        names: Vec<String>,
        bias: &[usize],
    ) -> Self {
        let n = env.n_states();
        let dim = names.len();
        let terminal: Vec<bool> = (0..n).map(|s| env.is_terminal(s)).collect();
        let rows: Vec<Vec<f64>> = (0..n).map(&raw).collect();
        let mut bias_mask = vec![false; dim];
        for &b in bias {
            bias_mask[b] = true;
        }
        let scaler = Scaler::fit(
            rows.iter()
                .zip(&terminal)
                .filter(|(_, &t)| !t)
                .map(|(r, _)| r.as_slice()),
            spec.scaling,
            &bias_mask,
        );
        let mut reward = Vec::with_capacity(n * dim);
        for (row, &t) in rows.iter().zip(&terminal) {
            if t {
                reward.extend(std::iter::repeat_n(0.0, dim));
            } else {
                reward.extend(scaler.apply(row));
            }
        }
        Self {
            spec: spec.clone(),
            n_states: n,
            n_actions: env.n_actions(),
            reward_dim: dim,
            reward,
            value: ValueLayout::Replicated,
            names,
            terminal,
        }
    }

    fn afterstates(env: &TicTacToeEnv, spec: &FeatureSpec) -> Result<Self> {
        let n = env.n_states();
        let na = env.n_actions();
        let mut after_boards = Vec::new();
        let mut after_index = std::collections::HashMap::new();
        let mut index = vec![NO_ROW; n * na];
        for (s, b) in env.boards().iter().enumerate() {
            for a in b.empty_cells() {
                let after = b.play(a);
                let row = *after_index.entry(after).or_insert_with(|| {
                    after_boards.push(after);
                    after_boards.len() - 1
                });
                index[s * na + a] = row as u32;
            }
        }
        let state_rows: Vec<Vec<f64>> =
            env.boards().iter().map(tictactoe_reward_features).collect();
        let after_rows: Vec<Vec<f64>> =
            after_boards.iter().map(tictactoe_reward_features).collect();
        let raw_dim = tictactoe::RAW_DIM;
        let scaler = Scaler::fit(
            state_rows.iter().chain(&after_rows).map(Vec::as_slice),
            spec.scaling,
            &vec![false; raw_dim],
        );
        let state_rows: Vec<Vec<f64>> = state_rows.iter().map(|r| scaler.apply(r)).collect();
        let after_rows: Vec<Vec<f64>> = after_rows.iter().map(|r| scaler.apply(r)).collect();

        // Keep columns that vary over the space and are not copies of an
        // earlier kept column.
        let all = || state_rows.iter().chain(&after_rows);
        let mut keep: Vec<usize> = Vec::new();
        for j in 0..raw_dim {
            let first = state_rows[0][j];
            if all().all(|r| r[j] == first) {
                continue;
            }
            if keep.iter().any(|&k| all().all(|r| r[k] == r[j])) {
                continue;
            }
            keep.push(j);
        }
        let all_names = tictactoe::names();
        let names: Vec<String> = keep.iter().map(|&j| all_names[j].clone()).collect();
        let select = |r: &Vec<f64>| keep.iter().map(|&j| r[j]).collect::<Vec<f64>>();

        let dim = keep.len();
        let mut reward = Vec::with_capacity(n * dim);
        for r in &state_rows {
            reward.extend(select(r));
        }
        reward.extend(std::iter::repeat_n(0.0, dim));
        let rows = after_rows.iter().flat_map(select).collect();
        let mut terminal = vec![false; n];
        terminal[env.terminal()] = true;
        Ok(Self {
            spec: spec.clone(),
            n_states: n,
            n_actions: na,
            reward_dim: dim,
            reward,
            value: ValueLayout::Afterstate { rows, index },
            names,
            terminal,
        })
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn reward_names(&self) -> &[String] {
        &self.names
    }

    pub fn reward_row(&self, s: StateId) -> &[f64] {
        &self.reward[s * self.reward_dim..(s + 1) * self.reward_dim]
    }

    /// Like [`FeatureMap::value_features`] but reports illegal pairs.
    pub fn try_value_features(&self, s: StateId, a: ActionId) -> Result<Vec<f64>> {
        if s >= self.n_states {
            return Err(Error::StateOutOfRange {
                state: s,
                n_states: self.n_states,
            });
        }
        if self.terminal[s] {
            return Err(Error::TerminalState(s));
        }
        if a >= self.n_actions {
            return Err(Error::IllegalAction {
                state: s,
                action: a,
            });
        }
        match &self.value {
            ValueLayout::Replicated => {
                let m = self.reward_dim;
                let mut v = vec![0.0; m * self.n_actions];
                v[a * m..(a + 1) * m].copy_from_slice(self.reward_row(s));
                Ok(v)
            }
            ValueLayout::Afterstate { rows, index } => {
                let row = index[s * self.n_actions + a];
                if row == NO_ROW {
                    return Err(Error::IllegalAction {
                        state: s,
                        action: a,
                    });
                }
                let m = self.reward_dim;
                let r = row as usize;
                Ok(rows[r * m..(r + 1) * m].to_vec())
            }
        }
    }

    /// Writes reward features (one row per state) to `path`.
    pub fn write_reward_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["state".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for s in 0..self.n_states {
            let mut rec = vec![s.to_string()];
            rec.extend(self.reward_row(s).iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes value features (one row per legal state-action pair) to `path`.
    pub fn write_value_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["state".to_string(), "action".to_string()];
        header.extend((0..self.value_dim()).map(|j| format!("q{j}")));
        w.write_record(&header)?;
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                if let Ok(v) = self.try_value_features(s, a) {
                    let mut rec = vec![s.to_string(), a.to_string()];
                    rec.extend(v.iter().map(f64::to_string));
                    w.write_record(&rec)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl FeatureMap for FeatureTable {
    fn reward_dim(&self) -> usize {
        self.reward_dim
    }

    fn value_dim(&self) -> usize {
        match self.value {
            ValueLayout::Replicated => self.reward_dim * self.n_actions,
            ValueLayout::Afterstate { .. } => self.reward_dim,
        }
    }

    fn reward_features(&self, s: StateId) -> Vec<f64> {
        self.reward_row(s).to_vec()
    }

    /// Panics on terminal states and illegal actions; see
    /// [`FeatureTable::try_value_features`].
    fn value_features(&self, s: StateId, a: ActionId) -> Vec<f64> {
        match self.try_value_features(s, a) {
            Ok(v) => v,
            Err(e) => panic!("value features: {e}"),
        }
    }
}

fn blackjack_names(extended: bool) -> Vec<String> {
    let mut names: Vec<String> = blackjack::BASE_NAMES
        .iter()
        .map(|s| s.to_string())
        .collect();
    if extended {
        names.extend(blackjack::EXTENDED_NAMES.iter().map(|s| s.to_string()));
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{make_env, Board, EnvOptions, OpponentKind};

    fn table(tag: EnvTag, scaling: Scaling) -> (AnyEnv, FeatureTable) {
        let env = make_env(tag, &EnvOptions::default()).unwrap();
        let spec = FeatureSpec {
            scaling,
            ..FeatureSpec::new(tag)
        };
        let t = FeatureTable::build(&env, &spec).unwrap();
        (env, t)
    }

    fn check_bounds(env: &AnyEnv, t: &FeatureTable, lo: f64, hi: f64) {
        for s in 0..env.n_states() {
            let r = t.reward_features(s);
            assert_eq!(r.len(), t.reward_dim());
            if env.is_terminal(s) {
                assert!(r.iter().all(|&x| x == 0.0));
                continue;
            }
            assert!(r.iter().all(|&x| x >= lo - 1e-12 && x <= hi + 1e-12));
            for a in env.legal_actions(s).unwrap() {
                let v = t.value_features(s, a);
                assert_eq!(v.len(), t.value_dim());
                assert!(v.iter().all(|&x| x.abs() <= 1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn dimensions() {
        let (_, bj) = table(EnvTag::Blackjack, Scaling::UnitInterval);
        assert_eq!((bj.reward_dim(), bj.value_dim()), (10, 20));
        let (_, gw) = table(EnvTag::Gridworld32, Scaling::UnitInterval);
        assert_eq!((gw.reward_dim(), gw.value_dim()), (64, 320));
        let (_, ttt) = table(
            EnvTag::TicTacToe(OpponentKind::Random),
            Scaling::UnitInterval,
        );
        assert_eq!(ttt.reward_dim(), ttt.value_dim());
        assert!(ttt.reward_dim() > 9 && ttt.reward_dim() <= 74);
        assert_eq!(ttt.reward_names().len(), ttt.reward_dim());
    }

    #[test]
    fn extended_blackjack_has_fourteen() {
        let env = make_env(EnvTag::Blackjack, &EnvOptions::default()).unwrap();
        let spec = FeatureSpec {
            blackjack_extended: true,
            ..FeatureSpec::new(EnvTag::Blackjack)
        };
        let t = FeatureTable::build(&env, &spec).unwrap();
        assert_eq!((t.reward_dim(), t.value_dim()), (14, 28));
    }

    #[test]
    fn scaled_features_are_bounded() {
        for tag in [
            EnvTag::Blackjack,
            EnvTag::Gridworld32,
            EnvTag::TicTacToe(OpponentKind::Minimax),
        ] {
            let (env, t) = table(tag, Scaling::UnitInterval);
            check_bounds(&env, &t, 0.0, 1.0);
            let (env, t) = table(tag, Scaling::Symmetric);
            check_bounds(&env, &t, -1.0, 1.0);
        }
    }

    #[test]
    fn unit_scaling_attains_both_ends() {
        let (env, t) = table(
            EnvTag::TicTacToe(OpponentKind::Random),
            Scaling::UnitInterval,
        );
        let AnyEnv::TicTacToe(e) = &env else {
            unreachable!()
        };
        for j in 0..t.reward_dim() {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for s in 0..e.terminal() {
                let mut rows = vec![t.reward_features(s)];
                rows.extend(
                    env.legal_actions(s)
                        .unwrap()
                        .into_iter()
                        .map(|a| t.value_features(s, a)),
                );
                for r in rows {
                    lo = lo.min(r[j]);
                    hi = hi.max(r[j]);
                }
            }
            assert_eq!((lo, hi), (0.0, 1.0), "column {}", t.reward_names()[j]);
        }
    }

    #[test]
    fn blackjack_bias_stays_one() {
        let (env, t) = table(EnvTag::Blackjack, Scaling::Symmetric);
        for s in 0..env.n_states() {
            if !env.is_terminal(s) {
                assert_eq!(t.reward_features(s)[0], 1.0);
            }
        }
    }

    #[test]
    fn replicated_block_structure() {
        let (env, t) = table(EnvTag::Blackjack, Scaling::UnitInterval);
        let m = t.reward_dim();
        for s in 0..env.n_states() - 1 {
            for a in 0..2 {
                let v = t.value_features(s, a);
                assert_eq!(&v[a * m..(a + 1) * m], t.reward_row(s));
                let other = 1 - a;
                assert!(v[other * m..(other + 1) * m].iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn afterstate_consistency() {
        let (env, t) = table(
            EnvTag::TicTacToe(OpponentKind::Random),
            Scaling::UnitInterval,
        );
        let AnyEnv::TicTacToe(e) = &env else {
            unreachable!()
        };
        let start = e.start_state();
        let v0 = t.value_features(start, 0);
        let v4 = t.value_features(start, 4);
        assert_ne!(v0, v4);
        let s1 = e.state_of(&Board::parse("X../.O./...").unwrap()).unwrap();
        let s2 = e.state_of(&Board::parse("..X/.O./...").unwrap()).unwrap();
        let after1 = e.afterstate(s1, 2).unwrap();
        let after2 = e.afterstate(s2, 0).unwrap();
        assert_eq!(after1, after2);
        assert_eq!(t.value_features(s1, 2), t.value_features(s2, 0));
    }

    #[test]
    fn illegal_value_features_are_errors() {
        let (env, t) = table(
            EnvTag::TicTacToe(OpponentKind::Random),
            Scaling::UnitInterval,
        );
        let AnyEnv::TicTacToe(e) = &env else {
            unreachable!()
        };
        let s = e.state_of(&Board::parse("X../.O./...").unwrap()).unwrap();
        assert!(matches!(
            t.try_value_features(s, 0),
            Err(Error::IllegalAction { .. })
        ));
        assert!(matches!(
            t.try_value_features(e.terminal(), 0),
            Err(Error::TerminalState(_))
        ));
        assert!(t.try_value_features(s, 1).is_ok());
    }

    #[test]
    fn csv_export() {
        let (_, t) = table(EnvTag::Blackjack, Scaling::UnitInterval);
        let dir = tempfile::tempdir().unwrap();
        t.write_reward_csv(dir.path().join("r.csv")).unwrap();
        t.write_value_csv(dir.path().join("q.csv")).unwrap();
        let r = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert_eq!(r.lines().count(), 202);
        let q = std::fs::read_to_string(dir.path().join("q.csv")).unwrap();
        assert_eq!(q.lines().count(), 401);
    }
}
