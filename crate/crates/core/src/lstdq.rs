//! LSTDQ system built from demonstrations alone. The solved map `C = A⁻¹Z`
//! turns reward weights into state-action value weights: `w_Q = C w_R`.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::domain::{ActionId, DemonstrationSet, FeatureMap, StateId};
use crate::{Error, Result};

/// Largest accepted 1-norm condition estimate of `A + λI`.
pub const MAX_CONDITION: f64 = 1e12;
/// Largest accepted `‖(A + λI)C − Z‖_max` after solving.
pub const MAX_RESIDUAL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstdqOptions {
    pub gamma: f64,
    /// `None` selects [`default_ridge`].
    pub ridge: Option<f64>,
    /// Adds each trajectory's last step with a zero successor. Only meaningful
    /// when episodes end in a terminal state.
    pub include_terminal: bool,
}

impl Default for LstdqOptions {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            ridge: None,
            include_terminal: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstdqSystem {
    a: DMatrix<f64>,
    z: DMatrix<f64>,
    c: Option<DMatrix<f64>>,
    gamma: f64,
    ridge: f64,
    sample_count: u64,
}

type Successors = BTreeMap<Option<(StateId, ActionId)>, u64>;

fn sparse(v: &[f64]) -> Vec<(usize, f64)> {
    v.iter()
        .copied()
        .enumerate()
        .filter(|&(_, x)| x != 0.0)
        .collect()
}

fn checked(v: Vec<f64>, dim: usize) -> Result<Vec<f64>> {
    if v.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("features"));
    }
    Ok(v)
}

/// Sums `A = Σ g_Q(s,a)(g_Q(s,a) − γ g_Q(s',a'))ᵀ` and `Z = Σ g_Q(s,a) g_R(s)ᵀ`
/// over consecutive demonstrated pairs.
///
/// Transitions are grouped by state-action pair and summed in key order, so
/// the result does not depend on the order of trajectories.
pub fn accumulate(
    demos: &DemonstrationSet,
    features: &dyn FeatureMap,
    gamma: f64,
    include_terminal: bool,
) -> Result<LstdqSystem> {
    demos.ensure_non_empty()?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Config(format!(
            "LSTDQ discount {gamma} outside [0, 1]"
        )));
    }
    let mut groups: BTreeMap<(StateId, ActionId), Successors> = BTreeMap::new();
    for traj in demos.trajectories() {
        let steps = traj.steps();
        for pair in steps.windows(2) {
            let next = Some((pair[1].state, pair[1].action));
            *groups
                .entry((pair[0].state, pair[0].action))
                .or_default()
                .entry(next)
                .or_default() += 1;
        }
        if include_terminal {
            let last = steps[steps.len() - 1];
            *groups
                .entry((last.state, last.action))
                .or_default()
                .entry(None)
                .or_default() += 1;
        }
    }
    if groups.is_empty() {
        return Err(Error::InvalidDemonstration(
            "no transitions: trajectories of length one need terminal closure".into(),
        ));
    }

    let mq = features.value_dim();
    let mr = features.reward_dim();
    let mut a = DMatrix::zeros(mq, mq);
    let mut z = DMatrix::zeros(mq, mr);
    let mut sample_count = 0;
    let mut value_cache: BTreeMap<(StateId, ActionId), Vec<f64>> = BTreeMap::new();
    let mut value = |s, act| -> Result<Vec<f64>> {
        if let Some(v) = value_cache.get(&(s, act)) {
            return Ok(v.clone());
        }
        let v = checked(features.value_features(s, act), mq)?;
        value_cache.insert((s, act), v.clone());
        Ok(v)
    };
    for (&(s, act), successors) in &groups {
        let g = value(s, act)?;
        let mut diff = vec![0.0; mq];
        let mut n = 0u64;
        for (next, &count) in successors {
            let w = count as f64;
            for (d, x) in diff.iter_mut().zip(&g) {
                *d += w * x;
            }
            if let Some((s2, a2)) = *next {
                for (j, x) in sparse(&value(s2, a2)?) {
                    diff[j] -= w * gamma * x;
                }
            }
            n += count;
        }
        let g_r = checked(features.reward_features(s), mr)?;
        let g_nz = sparse(&g);
        let diff_nz = sparse(&diff);
        let r_nz = sparse(&g_r);
        let n_f = n as f64;
        for &(i, gi) in &g_nz {
            for &(j, dj) in &diff_nz {
                a[(i, j)] += gi * dj;
            }
            for &(j, rj) in &r_nz {
                z[(i, j)] += n_f * gi * rj;
            }
        }
        sample_count += n;
    }
    Ok(LstdqSystem {
        a,
        z,
        c: None,
        gamma,
        ridge: 0.0,
        sample_count,
    })
}

/// `1e-6 · trace(A) / m_Q`, floored at zero.
pub fn default_ridge(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    (1e-6 * a.trace() / a.nrows() as f64).max(0.0)
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl LstdqSystem {
    /// Accumulates and solves in one go.
    pub fn from_demos(
        demos: &DemonstrationSet,
        features: &dyn FeatureMap,
        options: &LstdqOptions,
    ) -> Result<Self> {
        let system = accumulate(demos, features, options.gamma, options.include_terminal)?;
        let ridge = options.ridge.unwrap_or_else(|| default_ridge(&system.a));
        system.solve(ridge)
    }

    /// An unsolved system from explicit matrices.
    pub fn from_matrices(a: DMatrix<f64>, z: DMatrix<f64>, gamma: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() != z.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: if a.is_square() { z.nrows() } else { a.ncols() },
            });
        }
        Ok(Self {
            a,
            z,
            c: None,
            gamma,
            ridge: 0.0,
            sample_count: 0,
        })
    }

    /// Solves `(A + λI) C = Z` by LU with partial pivoting plus iterative
    /// refinement.
    pub fn solve(mut self, ridge: f64) -> Result<Self> {
        if !(ridge >= 0.0) || !ridge.is_finite() {
            return Err(Error::Config(format!(
                "ridge {ridge} must be finite and non-negative"
            )));
        }
        let n = self.a.nrows();
        let m = &self.a + DMatrix::identity(n, n) * ridge;
        let lu = m.clone().lu();
        let inverse = lu.try_inverse().ok_or(Error::Singular {
            condition: f64::INFINITY,
        })?;
        let condition = norm1(&m) * norm1(&inverse);
        if !(condition <= MAX_CONDITION) {
            return Err(Error::Singular { condition });
        }
        let mut c = lu.solve(&self.z).ok_or(Error::Singular { condition })?;
        let mut residual = f64::INFINITY;
        for _ in 0..3 {
            let r = &self.z - &m * &c;
            let correction = lu.solve(&r).ok_or(Error::Singular { condition })?;
            c += correction;
            residual = (&m * &c - &self.z).amax();
            if residual <= MAX_RESIDUAL {
                break;
            }
        }
        if !(residual <= MAX_RESIDUAL) {
            return Err(Error::Singular { condition });
        }
        self.ridge = ridge;
        self.c = Some(c);
        Ok(self)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// `None` until [`LstdqSystem::solve`] succeeds.
    pub fn c(&self) -> Option<&DMatrix<f64>> {
        self.c.as_ref()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Number of transitions summed into `A` and `Z`.
    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn value_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn reward_dim(&self) -> usize {
        self.z.ncols()
    }

    fn solved(&self) -> Result<&DMatrix<f64>> {
        self.c
            .as_ref()
            .ok_or_else(|| Error::InvalidModel("LSTDQ system has not been solved".into()))
    }

    /// `‖(A + λI)C − Z‖_max`.
    pub fn residual(&self) -> Result<f64> {
        let c = self.solved()?;
        let n = self.a.nrows();
        let m = &self.a + DMatrix::identity(n, n) * self.ridge;
        Ok((m * c - &self.z).amax())
    }

    /// `w_Q = C w_R`.
    pub fn q_weights(&self, w_r: &[f64]) -> Result<Vec<f64>> {
        let c = self.solved()?;
        if w_r.len() != c.ncols() {
            return Err(Error::DimensionMismatch {
                expected: c.ncols(),
                got: w_r.len(),
            });
        }
        Ok((c * DVector::from_column_slice(w_r)).as_slice().to_vec())
    }

    /// `Cᵀ g` for a value feature vector `g`.
    pub fn project(&self, g: &[f64]) -> Result<Vec<f64>> {
        let c = self.solved()?;
        if g.len() != c.nrows() {
            return Err(Error::DimensionMismatch {
                expected: c.nrows(),
                got: g.len(),
            });
        }
        let mut out = vec![0.0; c.ncols()];
        for (i, gi) in sparse(g) {
            for (j, o) in out.iter_mut().enumerate() {
                *o += gi * c[(i, j)];
            }
        }
        Ok(out)
    }

    /// Writes `A.csv`, `Z.csv` and, once solved, `C.csv` into `dir`.
    pub fn write_csv(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut mats = vec![("A.csv", &self.a), ("Z.csv", &self.z)];
        if let Some(c) = &self.c {
            mats.push(("C.csv", c));
        }
        for (name, m) in mats {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_path(dir.join(name))?;
            for row in m.row_iter() {
                w.write_record(row.iter().map(|x| format!("{x:e}")))?;
            }
            w.flush()?;
        }
        Ok(())
    }
}
