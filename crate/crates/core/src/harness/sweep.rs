use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ModelName};
use crate::domain::{ActionSets, DemonstrationSet, Step, TabularMdp, TabularPolicy, Trajectory};
use crate::envs::{make_env, AnyEnv, EnvTag, Environment, EpisodeEnd};
use crate::estimators::{
    extract_policy, fit_po, fit_rp, learned_reward, FitReport, FittedModel, PolicyMode,
};
use crate::eval::{
    loss_against, policy_evaluation, solve_with_reward, value_iteration, ValueTable,
};
use crate::features::FeatureTable;
use crate::lstdq::LstdqOptions;
use crate::{Error, Result};

/// Samples `n_episodes` trajectories of `expert` in `env`. Episodes run until
/// a terminal state or, for truncated environments, the step limit.
pub fn generate_demos(
    env: &dyn Environment,
    expert: &TabularPolicy,
    n_episodes: usize,
    rng: &mut dyn RngCore,
) -> Result<DemonstrationSet> {
    let limit = match env.episode_end() {
        EpisodeEnd::Terminal => usize::MAX,
        EpisodeEnd::Truncated { steps } => steps,
    };
    let mut trajectories = Vec::with_capacity(n_episodes);
    for _ in 0..n_episodes {
        let mut s = env.reset(rng);
        let mut steps = Vec::new();
        loop {
            let a = expert.sample(s, rng);
            steps.push(Step::new(s, a));
            let out = env.step(s, a, rng)?;
            if out.done || env.is_terminal(out.next) || steps.len() >= limit {
                break;
            }
            s = out.next;
        }
        trajectories.push(Trajectory::new(steps)?);
    }
    DemonstrationSet::new(env.tag().to_string(), trajectories)
}

/// Per-(run, episode count) seed. Each input is mixed through its own
/// SplitMix64 round, so adding episode counts or runs leaves other streams
/// untouched.
pub fn derive_seed(master: u64, run: usize, episodes: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(master) ^ run as u64) ^ episodes as u64)
}

/// Everything needed to run and score fits on one environment.
pub struct Experiment {
    pub config: ExperimentConfig,
    /// Environment under evaluation.
    pub env: AnyEnv,
    /// Environment used to sample demonstrations (differs for tic-tac-toe
    /// when the demonstration opponent is not the evaluation opponent).
    pub demo_env: AnyEnv,
    pub features: FeatureTable,
    pub actions: ActionSets,
    pub mdp: TabularMdp,
    pub v_star: ValueTable,
    pub expert: TabularPolicy,
}

/// Outcome of fitting and scoring one model on one demonstration set.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub policy: TabularPolicy,
    pub loss: f64,
    pub report: Option<FitReport>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let env = make_env(config.env, &config.env_options)?;
        let demo_env = match &env {
            AnyEnv::TicTacToe(e) => {
                AnyEnv::TicTacToe(e.with_opponent(config.demo_opponent.resolve(e.opponent())))
            }
            other => other.clone(),
        };
        let features = FeatureTable::build(&env, &config.feature_spec())?;
        let actions = env.action_sets();
        let mdp = env.exact_model();
        let optimal = value_iteration(&mdp)?;
        let expert = match &demo_env {
            AnyEnv::TicTacToe(e) => {
                let subsets: Vec<Vec<usize>> = (0..e.n_states())
                    .map(|s| {
                        e.board(s)
                            .map_or_else(Vec::new, |b| e.minimax().optimal_moves(&b))
                    })
                    .collect();
                TabularPolicy::uniform_over(&actions, &subsets)
            }
            _ => optimal.policy.clone(),
        };
        Ok(Self {
            config,
            env,
            demo_env,
            features,
            actions,
            mdp,
            v_star: optimal.values,
            expert,
        })
    }

    pub fn tag(&self) -> EnvTag {
        self.config.env
    }

    pub fn lstdq_options(&self) -> LstdqOptions {
        LstdqOptions {
            gamma: self.config.lstdq_gamma.unwrap_or(self.mdp.discount()),
            ridge: self.config.lstdq_ridge,
            include_terminal: self.config.lstdq_include_terminal
                && self.env.episode_end() == EpisodeEnd::Terminal,
        }
    }

    pub fn demos(&self, n_episodes: usize, seed: u64) -> Result<DemonstrationSet> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        generate_demos(&self.demo_env, &self.expert, n_episodes, &mut rng)
    }

    /// `ℓ(π)` against the evaluation model.
    pub fn loss(&self, policy: &TabularPolicy) -> Result<f64> {
        Ok(loss_against(&self.mdp, &self.v_star, policy)?.loss.max(0.0))
    }

    /// Start-distribution value `Σ μ(s) V^π(s)` against the evaluation model.
    pub fn policy_value(&self, policy: &TabularPolicy) -> Result<f64> {
        Ok(policy_evaluation(&self.mdp, policy)?.start_value(self.mdp.start()))
    }

    pub fn fit(
        &self,
        model: ModelName,
        demos: &DemonstrationSet,
    ) -> Result<(FittedModel, FitReport)> {
        let cfg = &self.config;
        match model {
            ModelName::Rp | ModelName::RpResolve => {
                let (p, r) = fit_rp(
                    demos,
                    &self.features,
                    &self.actions,
                    &self.lstdq_options(),
                    cfg.beta,
                    &cfg.fit,
                )?;
                Ok((FittedModel::Rp(p), r))
            }
            ModelName::Po => {
                let (p, r) = fit_po(demos, &self.features, &self.actions, cfg.beta, &cfg.fit)?;
                Ok((FittedModel::Po(p), r))
            }
            ModelName::RandomBaseline => Err(Error::InvalidModel(
                "the random baseline is not fitted".into(),
            )),
        }
    }

    /// Policy evaluated for `model` given an already fitted model.
    pub fn policy_for(
        &self,
        model: ModelName,
        fitted: Option<&FittedModel>,
        mode: PolicyMode,
    ) -> Result<TabularPolicy> {
        let need =
            || fitted.ok_or_else(|| Error::InvalidModel(format!("{model} needs a fitted model")));
        match model {
            ModelName::RandomBaseline => Ok(TabularPolicy::uniform(&self.actions)),
            ModelName::Rp | ModelName::Po => {
                extract_policy(need()?, &self.features, &self.actions, mode)
            }
            ModelName::RpResolve => {
                let reward = learned_reward(need()?, &self.features, self.mdp.n_states())?;
                solve_with_reward(&self.mdp, &reward)
            }
        }
    }

    /// Fits (when needed) and scores `model` on `demos`.
    pub fn score(&self, model: ModelName, demos: &DemonstrationSet) -> Result<Scored> {
        let (fitted, report) = match model {
            ModelName::RandomBaseline => (None, None),
            _ => {
                let (m, r) = self.fit(model, demos)?;
                (Some(m), Some(r))
            }
        };
        let policy = self.policy_for(model, fitted.as_ref(), self.config.eval_mode)?;
        let loss = self.loss(&policy)?;
        Ok(Scored {
            policy,
            loss,
            report,
        })
    }
}

pub fn eval_mode_name(model: ModelName, mode: PolicyMode) -> String {
    match model {
        ModelName::Rp | ModelName::Po => mode.to_string(),
        ModelName::RpResolve => "resolve".into(),
        ModelName::RandomBaseline => "uniform".into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub run: usize,
    pub env: String,
    pub model: ModelName,
    pub episodes: usize,
    /// `None` when a stage failed; see `status`.
    pub loss: Option<f64>,
    pub fit_ms: f64,
    pub eval_mode: String,
    pub seed: u64,
    pub status: String,
}

pub const RESULT_COLUMNS: [&str; 9] = [
    "run",
    "env",
    "model",
    "episodes",
    "loss",
    "fit_ms",
    "eval_mode",
    "seed",
    "status",
];

/// One row per (model, episode count, run), sorted in that order. Demonstrations
/// are shared between models within a (run, episode count) cell, and
/// `rp`/`rp-resolve` share one fit.
pub fn run_sweep(exp: &Experiment) -> Vec<ResultRow> {
    let cfg = &exp.config;
    let cells: Vec<(usize, usize)> = cfg
        .episodes
        .iter()
        .flat_map(|&n| (0..cfg.runs).map(move |run| (n, run)))
        .collect();
    let mut rows: Vec<ResultRow> = cells
        .par_iter()
        .flat_map_iter(|&(n, run)| run_cell(exp, n, run))
        .collect();
    rows.sort_by_key(|r| (r.model, r.episodes, r.run));
    rows
}

fn run_cell(exp: &Experiment, episodes: usize, run: usize) -> Vec<ResultRow> {
    let cfg = &exp.config;
    let seed = derive_seed(cfg.seed, run, episodes);
    let demos = exp.demos(episodes, seed).map_err(|e| e.to_string());
    let fit = |model| -> std::result::Result<(FittedModel, FitReport), String> {
        exp.fit(model, demos.as_ref().map_err(Clone::clone)?)
            .map_err(|e| e.to_string())
    };
    let mut rp_fit = None;
    let mut out = Vec::with_capacity(cfg.models.len());
    for &model in &cfg.models {
        let outcome = match model {
            ModelName::RandomBaseline => exp
                .loss(&TabularPolicy::uniform(&exp.actions))
                .map(|l| (l, 0.0))
                .map_err(|e| e.to_string()),
            _ => {
                let fitted = match model {
                    ModelName::Rp | ModelName::RpResolve => {
                        rp_fit.get_or_insert_with(|| fit(ModelName::Rp)).clone()
                    }
                    _ => fit(model),
                };
                fitted.and_then(|(m, report)| {
                    let ms = report.elapsed.as_secs_f64() * 1e3;
                    exp.policy_for(model, Some(&m), cfg.eval_mode)
                        .and_then(|p| exp.loss(&p))
                        .map(|l| (l, ms))
                        .map_err(|e| e.to_string())
                })
            }
        };
        let (loss, fit_ms, status) = match outcome {
            Ok((loss, ms)) => (Some(loss), ms, "ok".to_string()),
            Err(msg) => (None, 0.0, msg),
        };
        out.push(ResultRow {
            run,
            env: cfg.env.to_string(),
            model,
            episodes,
            loss,
            fit_ms: if cfg.record_timing { fit_ms } else { 0.0 },
            eval_mode: eval_mode_name(model, cfg.eval_mode),
            seed,
            status,
        });
    }
    out
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_results_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.run.to_string(),
            r.env.clone(),
            r.model.to_string(),
            r.episodes.to_string(),
            r.loss.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.fit_ms),
            r.eval_mode.clone(),
            r.seed.to_string(),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub model: ModelName,
    pub episodes: usize,
    pub runs: usize,
    pub ok_runs: usize,
    pub mean_loss: f64,
    /// Standard error of the mean; zero for a single run.
    pub std_err: f64,
    pub mean_fit_ms: f64,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(ModelName, usize), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.model, r.episodes)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((model, episodes), rs)| {
            let losses: Vec<f64> = rs.iter().filter_map(|r| r.loss).collect();
            let k = losses.len() as f64;
            let mean = if losses.is_empty() {
                f64::NAN
            } else {
                losses.iter().sum::<f64>() / k
            };
            let std_err = if losses.len() > 1 {
                let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (k - 1.0);
                (var / k).sqrt()
            } else {
                0.0
            };
            let mean_fit_ms = rs.iter().map(|r| r.fit_ms).sum::<f64>() / rs.len() as f64;
            SummaryRow {
                model,
                episodes,
                runs: rs.len(),
                ok_runs: losses.len(),
                mean_loss: mean,
                std_err,
                mean_fit_ms,
            }
        })
        .collect()
}

pub fn write_summary_csv(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "model",
        "episodes",
        "runs",
        "ok_runs",
        "mean_loss",
        "std_err",
        "mean_fit_ms",
    ])?;
    for r in rows {
        w.write_record([
            r.model.to_string(),
            r.episodes.to_string(),
            r.runs.to_string(),
            r.ok_runs.to_string(),
            fmt_f64(r.mean_loss),
            fmt_f64(r.std_err),
            fmt_f64(r.mean_fit_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<out>/<env>/<model>/{results.csv,summary.csv,config.echo}` for
/// every model and returns the model directories.
pub fn write_sweep(
    config: &ExperimentConfig,
    rows: &[ResultRow],
    out: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for &model in &config.models {
        let dir = out
            .as_ref()
            .join(config.env.path_name())
            .join(model.as_str());
        std::fs::create_dir_all(&dir)?;
        let mine: Vec<ResultRow> = rows.iter().filter(|r| r.model == model).cloned().collect();
        write_results_csv(&mine, dir.join("results.csv"))?;
        write_summary_csv(&summarize(&mine), dir.join("summary.csv"))?;
        std::fs::write(dir.join("config.echo"), config.echo())?;
        dirs.push(dir);
    }
    Ok(dirs)
}
