#![allow(dead_code)]

use irl::domain::{DemonstrationSet, Step, TabularPolicy, Trajectory};
use irl::envs::{EnvTag, OpponentKind};
use irl::harness::{generate_demos, Experiment, ExperimentConfig};
use irl::lstdq::{LstdqOptions, LstdqSystem};
use irl::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DOMAINS: [EnvTag; 3] = [
    EnvTag::Blackjack,
    EnvTag::Gridworld32,
    EnvTag::TicTacToe(OpponentKind::Random),
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn experiment(tag: EnvTag) -> Experiment {
    Experiment::new(ExperimentConfig::new(tag)).expect("experiment")
}

/// Demonstrations of the uniform policy: every legal action appears, so the
/// likelihood has a finite maximiser.
pub fn uniform_demos(exp: &Experiment, episodes: usize, seed: u64) -> DemonstrationSet {
    let uniform = TabularPolicy::uniform(&exp.actions);
    generate_demos(&exp.demo_env, &uniform, episodes, &mut rng(seed)).unwrap()
}

/// LSTDQ system with the configured ridge, or a ridge of 1e-3 when a tiny
/// demonstration set leaves `A` numerically singular.
pub fn system(exp: &Experiment, demos: &DemonstrationSet) -> LstdqSystem {
    let options = exp.lstdq_options();
    match LstdqSystem::from_demos(demos, &exp.features, &options) {
        Err(Error::Singular { .. }) => LstdqSystem::from_demos(
            demos,
            &exp.features,
            &LstdqOptions {
                ridge: Some(1e-3),
                ..options
            },
        )
        .unwrap(),
        other => other.unwrap(),
    }
}

pub fn traj(pairs: &[(usize, usize)]) -> Trajectory {
    Trajectory::new(pairs.iter().map(|&(s, a)| Step::new(s, a)).collect()).unwrap()
}

pub fn demo_set(trajs: Vec<Trajectory>) -> DemonstrationSet {
    DemonstrationSet::new("synthetic", trajs).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Central finite-difference gradient with step `h`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, w: &[f64], h: f64) -> Vec<f64> {
    let mut x = w.to_vec();
    (0..w.len())
        .map(|i| {
            x[i] = w[i] + h;
            let up = f(&x);
            x[i] = w[i] - h;
            let down = f(&x);
            x[i] = w[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
