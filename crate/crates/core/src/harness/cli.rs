use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::{parse_list, ExperimentConfig, ModelName};
use super::sweep::{run_sweep, summarize, write_sweep, Experiment};
use crate::domain::{DemonstrationSet, TabularPolicy};
use crate::envs::EnvTag;
use crate::estimators::{
    extract_policy, learned_reward, FittedModel, ModelKind, ParamsFile, PoParams, PolicyMode,
    RpParams,
};
use crate::eval::solve_with_reward;
use crate::lstdq::LstdqSystem;
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "irl",
    about = "Model-free inverse reinforcement learning benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// blackjack, gridworld32, tictactoe:random or tictactoe:minimax
    #[arg(long)]
    env: Option<String>,
    /// Flat `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample expert demonstrations
    GenDemos {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Output demonstration file
        #[arg(long, default_value = "demos.txt")]
        out: PathBuf,
    },
    /// Fit a model to a demonstration file
    Fit {
        #[command(flatten)]
        common: Common,
        /// rp or po
        #[arg(long)]
        model: String,
        #[arg(long)]
        demos: PathBuf,
        /// Output parameter file
        #[arg(long, default_value = "params.txt")]
        out: PathBuf,
    },
    /// Exact loss of a fitted model
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        params: PathBuf,
        /// Demonstrations the rp model was fitted on (rebuilds its LSTDQ map)
        #[arg(long)]
        demos: Option<PathBuf>,
        /// greedy, softmax or resolve
        #[arg(long)]
        mode: Option<String>,
    },
    /// Episode-count sweep with repeated runs
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated: rp, po, rp-resolve, random-baseline
        #[arg(long)]
        model: Option<String>,
        /// Comma-separated episode counts
        #[arg(long)]
        episodes: Option<String>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the optimal start-state value of the environment
    SolveEnv {
        #[command(flatten)]
        common: Common,
    },
}

/// Runs the command line; returns the process exit code (0 success, 1 usage
/// or configuration error, 2 runtime error).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_config_error() {
                1
            } else {
                2
            }
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut file = ExperimentConfig::new(EnvTag::Blackjack);
    let mut env_from_file = false;
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        env_from_file = text.lines().any(|l| {
            l.split('#')
                .next()
                .unwrap_or("")
                .split('=')
                .next()
                .is_some_and(|k| k.trim() == "env")
        });
        file.apply_text(&text)?;
    }
    let env = match &common.env {
        Some(tag) => tag.parse()?,
        None if env_from_file => file.env,
        None => return Err(Error::Config("--env is required".into())),
    };
    // rebuild so that environment-dependent defaults follow the chosen tag
    let mut cfg = ExperimentConfig::new(env);
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    cfg.env = env;
    Ok(cfg)
}

fn same_family(a: EnvTag, b: EnvTag) -> bool {
    std::mem::discriminant(&a) == std::mem::discriminant(&b)
}

fn read_demos(path: &PathBuf, env: EnvTag) -> Result<DemonstrationSet> {
    let demos = DemonstrationSet::read(path)?;
    if let Ok(tag) = demos.env().parse::<EnvTag>() {
        if !same_family(tag, env) {
            return Err(Error::Config(format!(
                "demonstrations are for {tag}, not {env}"
            )));
        }
    }
    Ok(demos)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::GenDemos {
            common,
            episodes,
            seed,
            out: path,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let exp = Experiment::new(cfg)?;
            let demos = exp.demos(episodes, exp.config.seed)?;
            demos.write(&path)?;
            writeln!(
                out,
                "wrote {} episodes ({} steps) to {}",
                demos.len(),
                demos.step_count(),
                path.display()
            )?;
        }
        Command::Fit {
            common,
            model,
            demos,
            out: path,
        } => {
            let cfg = load_config(&common)?;
            let kind: ModelKind = model.parse()?;
            let demos = read_demos(&demos, cfg.env)?;
            let exp = Experiment::new(cfg)?;
            let name = match kind {
                ModelKind::Rp => ModelName::Rp,
                ModelKind::Po => ModelName::Po,
            };
            let (fitted, report) = exp.fit(name, &demos)?;
            ParamsFile::from_model(&fitted).write(&path)?;
            writeln!(
                out,
                "model={kind} objective={:?} grad_norm={:e} iterations={} converged={} line_search_failed={}",
                report.objective, report.grad_norm, report.iterations, report.converged, report.line_search_failed
            )?;
        }
        Command::Eval {
            common,
            params,
            demos,
            mode,
        } => {
            let cfg = load_config(&common)?;
            let params = ParamsFile::read(&params)?;
            let exp = Experiment::new(cfg)?;
            let model = match params.kind {
                ModelKind::Po => FittedModel::Po(PoParams {
                    w_q: params.weights,
                    beta: params.beta,
                }),
                ModelKind::Rp => {
                    let path = demos.ok_or_else(|| {
                        Error::Config("--demos is required to evaluate an rp model".into())
                    })?;
                    let demos = read_demos(&path, exp.tag())?;
                    let system =
                        LstdqSystem::from_demos(&demos, &exp.features, &exp.lstdq_options())?;
                    FittedModel::Rp(RpParams {
                        w_r: params.weights,
                        beta: params.beta,
                        system,
                    })
                }
            };
            let mode = mode.unwrap_or_else(|| exp.config.eval_mode.to_string());
            let policy: TabularPolicy = match mode.as_str() {
                "resolve" => {
                    let reward = learned_reward(&model, &exp.features, exp.mdp.n_states())?;
                    solve_with_reward(&exp.mdp, &reward)?
                }
                other => {
                    let m: PolicyMode = other.parse()?;
                    extract_policy(&model, &exp.features, &exp.actions, m)?
                }
            };
            let loss = exp.loss(&policy)?;
            let value = exp.policy_value(&policy)?;
            writeln!(out, "loss={loss:?} value={value:?} mode={mode}")?;
        }
        Command::Sweep {
            common,
            model,
            episodes,
            runs,
            seed,
            out: dir,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(m) = model {
                cfg.models = parse_list(&m, |v| v.parse())?;
            }
            if let Some(e) = episodes {
                cfg.episodes = parse_list(&e, |v| {
                    v.parse()
                        .map_err(|_| Error::Config(format!("invalid episode count {v:?}")))
                })?;
            }
            if let Some(r) = runs {
                cfg.runs = r;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let exp = Experiment::new(cfg)?;
            let rows = run_sweep(&exp);
            let dirs = write_sweep(&exp.config, &rows, &dir)?;
            for s in summarize(&rows) {
                writeln!(
                    out,
                    "{} episodes={} runs={} ok={} mean_loss={:.6} std_err={:.6}",
                    s.model, s.episodes, s.runs, s.ok_runs, s.mean_loss, s.std_err
                )?;
            }
            for d in dirs {
                writeln!(out, "wrote {}", d.display())?;
            }
        }
        Command::SolveEnv { common } => {
            let cfg = load_config(&common)?;
            let exp = Experiment::new(cfg)?;
            writeln!(out, "{}", exp.v_star.start_value(exp.mdp.start()))?;
        }
    }
    Ok(())
}
