//! Exact oracles over a [`TabularMdp`]: policy evaluation, value iteration,
//! minimax solving and the start-distribution-weighted value loss.
//!
//! Nothing here is visible to the estimators; the tabular model is used only
//! to build experts and to score learned policies.

pub mod minimax;

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::domain::{ActionId, StateId, TabularMdp, TabularPolicy};
use crate::{Error, Result};

const RESIDUAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub v: Vec<f64>,
    /// Row-major `n_states * n_actions`; NaN on illegal and terminal entries.
    pub q: Option<Vec<f64>>,
    pub discount: f64,
    pub horizon: Option<usize>,
}

impl ValueTable {
    /// Sup-norm Bellman optimality residual of `v`.
    pub fn bellman_residual(&self, mdp: &TabularMdp) -> f64 {
        (0..mdp.n_states())
            .filter(|&s| !mdp.is_terminal(s))
            .map(|s| (backup_max(mdp, &self.v, s) - self.v[s]).abs())
            .fold(0.0, f64::max)
    }

    /// Start-distribution-weighted value.
    pub fn start_value(&self, start: &[f64]) -> f64 {
        start.iter().zip(&self.v).map(|(m, v)| m * v).sum()
    }
}

#[derive(Debug, Clone)]
pub struct OptimalSolution {
    pub values: ValueTable,
    /// Deterministic greedy policy, lowest action id among near-ties.
    pub policy: TabularPolicy,
    pub greedy: Vec<Option<ActionId>>,
    /// All actions whose Q is within tolerance of the maximum.
    pub optimal_actions: Vec<Vec<ActionId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub loss: f64,
    pub v_star: Vec<f64>,
    pub v_pi: Vec<f64>,
    /// `V*(s) - V^π(s)`
    pub gaps: Vec<f64>,
    pub start: Vec<f64>,
}

impl LossReport {
    pub fn from_values(v_star: &[f64], v_pi: &[f64], start: &[f64]) -> Self {
        let gaps: Vec<f64> = v_star.iter().zip(v_pi).map(|(a, b)| a - b).collect();
        let loss = weighted_sum(start, &gaps);
        Self {
            loss,
            v_star: v_star.to_vec(),
            v_pi: v_pi.to_vec(),
            gaps,
            start: start.to_vec(),
        }
    }

    /// `Σ μ(s) gap(s)` over the stored gaps.
    pub fn recompute(&self) -> f64 {
        weighted_sum(&self.start, &self.gaps)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["state", "v_star", "v_pi", "gap", "mu"])?;
        for s in 0..self.gaps.len() {
            w.write_record([
                s.to_string(),
                self.v_star[s].to_string(),
                self.v_pi[s].to_string(),
                self.gaps[s].to_string(),
                self.start[s].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn weighted_sum(weights: &[f64], xs: &[f64]) -> f64 {
    weights.iter().zip(xs).map(|(w, x)| w * x).sum()
}

fn backup(mdp: &TabularMdp, v: &[f64], s: StateId, a: ActionId) -> f64 {
    let m = mdp.model(s, a).expect("legal action");
    m.reward + mdp.discount() * m.expected(v)
}

fn backup_max(mdp: &TabularMdp, v: &[f64], s: StateId) -> f64 {
    mdp.actions(s)
        .map(|(a, _)| backup(mdp, v, s, a))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Topological order of non-terminal states over edges with positive
/// probability under `uses(s, a)`, or `None` when a cycle exists.
fn topological_order(
    mdp: &TabularMdp,
    uses: impl Fn(StateId, ActionId) -> bool,
) -> Option<Vec<StateId>> {
    let n = mdp.n_states();
    let mut succ: Vec<Vec<StateId>> = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for s in (0..n).filter(|&s| !mdp.is_terminal(s)) {
        for (a, m) in mdp.actions(s) {
            if !uses(s, a) {
                continue;
            }
            for &(next, p) in &m.next {
                if p > 0.0 && !mdp.is_terminal(next) {
                    succ[s].push(next);
                }
            }
        }
        succ[s].sort_unstable();
        succ[s].dedup();
        for &t in &succ[s] {
            indegree[t] += 1;
        }
    }
    let mut queue: VecDeque<StateId> = (0..n)
        .filter(|&s| !mdp.is_terminal(s) && indegree[s] == 0)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(s) = queue.pop_front() {
        order.push(s);
        for &t in &succ[s] {
            indegree[t] -= 1;
            if indegree[t] == 0 {
                queue.push_back(t);
            }
        }
    }
    let live = (0..n).filter(|&s| !mdp.is_terminal(s)).count();
    (order.len() == live).then_some(order)
}

fn check_policy(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<()> {
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(Error::DimensionMismatch {
            expected: mdp.n_states() * mdp.n_actions(),
            got: policy.n_states() * policy.n_actions(),
        });
    }
    policy.validate(&mdp.action_sets())
}

fn policy_backup(mdp: &TabularMdp, policy: &TabularPolicy, v: &[f64], s: StateId) -> f64 {
    mdp.actions(s)
        .map(|(a, m)| {
            let p = policy.prob(s, a);
            if p == 0.0 {
                0.0
            } else {
                p * (m.reward + mdp.discount() * m.expected(v))
            }
        })
        .sum()
}

/// Exact `V^π`.
///
/// Finite horizons use backward induction; acyclic models are solved in
/// reverse topological order; otherwise `(I - γ P_π) V = R_π` is solved
/// directly. Undiscounted models need every state to reach a terminal.
pub fn policy_evaluation(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<ValueTable> {
    check_policy(mdp, policy)?;
    let n = mdp.n_states();
    let table = |v| ValueTable {
        v,
        q: None,
        discount: mdp.discount(),
        horizon: mdp.horizon(),
    };

    if let Some(h) = mdp.horizon() {
        let mut v = vec![0.0; n];
        for _ in 0..h {
            v = (0..n)
                .map(|s| {
                    if mdp.is_terminal(s) {
                        0.0
                    } else {
                        policy_backup(mdp, policy, &v, s)
                    }
                })
                .collect();
        }
        return Ok(table(v));
    }

    if let Some(order) = topological_order(mdp, |s, a| policy.prob(s, a) > 0.0) {
        let mut v = vec![0.0; n];
        for &s in order.iter().rev() {
            v[s] = policy_backup(mdp, policy, &v, s);
        }
        return Ok(table(v));
    }

    if mdp.discount() >= 1.0 && !all_reach_terminal(mdp, policy) {
        return Err(Error::ValueUndefined);
    }
    let live: Vec<StateId> = (0..n).filter(|&s| !mdp.is_terminal(s)).collect();
    let mut pos = vec![usize::MAX; n];
    for (i, &s) in live.iter().enumerate() {
        pos[s] = i;
    }
    let k = live.len();
    let mut m = DMatrix::<f64>::identity(k, k);
    let mut r = DVector::<f64>::zeros(k);
    for (i, &s) in live.iter().enumerate() {
        for (a, model) in mdp.actions(s) {
            let p = policy.prob(s, a);
            if p == 0.0 {
                continue;
            }
            r[i] += p * model.reward;
            for &(next, q) in &model.next {
                if pos[next] != usize::MAX {
                    m[(i, pos[next])] -= mdp.discount() * p * q;
                }
            }
        }
    }
    let x = m.lu().solve(&r).ok_or(Error::ValueUndefined)?;
    let mut v = vec![0.0; n];
    for (i, &s) in live.iter().enumerate() {
        v[s] = x[i];
    }
    Ok(table(v))
}

fn all_reach_terminal(mdp: &TabularMdp, policy: &TabularPolicy) -> bool {
    let n = mdp.n_states();
    let mut pred: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in 0..n {
        for (a, m) in mdp.actions(s) {
            if policy.prob(s, a) > 0.0 {
                for &(next, p) in &m.next {
                    if p > 0.0 {
                        pred[next].push(s);
                    }
                }
            }
        }
    }
    let mut seen = vec![false; n];
    let mut stack: Vec<StateId> = (0..n).filter(|&s| mdp.is_terminal(s)).collect();
    for &s in &stack {
        seen[s] = true;
    }
    while let Some(t) = stack.pop() {
        for &s in &pred[t] {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
    }
    seen.iter().all(|&b| b)
}

fn near_ties(q: &[f64], mdp: &TabularMdp, s: StateId) -> (Vec<ActionId>, f64) {
    let best = mdp
        .actions(s)
        .map(|(a, _)| q[s * mdp.n_actions() + a])
        .fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * best.abs().max(1.0);
    let set = mdp
        .actions(s)
        .map(|(a, _)| a)
        .filter(|&a| q[s * mdp.n_actions() + a] >= best - tol)
        .collect();
    (set, best)
}

/// Optimal values, the greedy optimal policy and all optimal actions per state.
///
/// Finite horizons and acyclic models are solved exactly by backward
/// induction; other models by Bellman-optimality sweeps to a sup-norm
/// residual of 1e-12.
pub fn value_iteration(mdp: &TabularMdp) -> Result<OptimalSolution> {
    let n = mdp.n_states();
    let mut v = vec![0.0; n];
    if let Some(h) = mdp.horizon() {
        for _ in 0..h {
            v = (0..n)
                .map(|s| {
                    if mdp.is_terminal(s) {
                        0.0
                    } else {
                        backup_max(mdp, &v, s)
                    }
                })
                .collect();
        }
    } else if let Some(order) = topological_order(mdp, |_, _| true) {
        for &s in order.iter().rev() {
            v[s] = backup_max(mdp, &v, s);
        }
    } else {
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            let next: Vec<f64> = (0..n)
                .map(|s| {
                    if mdp.is_terminal(s) {
                        0.0
                    } else {
                        backup_max(mdp, &v, s)
                    }
                })
                .collect();
            let residual = next
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            v = next;
            if residual <= RESIDUAL_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NotConverged(MAX_SWEEPS));
        }
    }

    let na = mdp.n_actions();
    let mut q = vec![f64::NAN; n * na];
    for s in (0..n).filter(|&s| !mdp.is_terminal(s)) {
        for (a, _) in mdp.actions(s) {
            q[s * na + a] = backup(mdp, &v, s, a);
        }
    }
    let mut optimal_actions = Vec::with_capacity(n);
    let mut greedy = Vec::with_capacity(n);
    for s in 0..n {
        if mdp.is_terminal(s) {
            optimal_actions.push(Vec::new());
            greedy.push(None);
        } else {
            let (set, _) = near_ties(&q, mdp, s);
            greedy.push(set.first().copied());
            optimal_actions.push(set);
        }
    }
    let policy = TabularPolicy::deterministic(&mdp.action_sets(), &greedy);
    Ok(OptimalSolution {
        values: ValueTable {
            v,
            q: Some(q),
            discount: mdp.discount(),
            horizon: mdp.horizon(),
        },
        policy,
        greedy,
        optimal_actions,
    })
}

/// `ℓ(π) = Σ_s μ(s) (V*(s) - V^π(s))`.
pub fn loss(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<LossReport> {
    let optimal = value_iteration(mdp)?;
    loss_against(mdp, &optimal.values, policy)
}

/// [`loss`] with a precomputed `V*`.
pub fn loss_against(
    mdp: &TabularMdp,
    v_star: &ValueTable,
    policy: &TabularPolicy,
) -> Result<LossReport> {
    let v_pi = policy_evaluation(mdp, policy)?;
    Ok(LossReport::from_values(&v_star.v, &v_pi.v, mdp.start()))
}

/// Greedy optimal policy of the model with its reward replaced by `reward[s]`.
pub fn solve_with_reward(mdp: &TabularMdp, reward: &[f64]) -> Result<TabularPolicy> {
    Ok(value_iteration(&mdp.with_state_reward(reward)?)?.policy)
}

/// Writes `state,v` rows.
pub fn write_values_csv(values: &ValueTable, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "state,v")?;
    for (s, v) in values.v.iter().enumerate() {
        writeln!(f, "{s},{v}")?;
    }
    Ok(())
}
