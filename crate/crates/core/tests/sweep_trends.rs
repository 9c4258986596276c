mod common;

use irl::envs::{EnvTag, OpponentKind};
use irl::harness::{run_sweep, summarize, Experiment, ExperimentConfig, ModelName};

/// More demonstrations never hurt on average: for every environment the mean
/// loss at 10⁴ episodes is at most the mean loss at 10.
#[test]
fn loss_at_ten_thousand_episodes_is_below_loss_at_ten() {
    for tag in [
        EnvTag::Blackjack,
        EnvTag::Gridworld32,
        EnvTag::TicTacToe(OpponentKind::Random),
        EnvTag::TicTacToe(OpponentKind::Minimax),
    ] {
        let mut cfg = ExperimentConfig::new(tag);
        cfg.episodes = vec![10, 10_000];
        cfg.runs = 3;
        cfg.seed = 17;
        let rows = run_sweep(&Experiment::new(cfg).unwrap());
        assert!(rows.iter().all(|r| r.status == "ok"));
        assert!(rows.iter().all(|r| r.loss.unwrap() >= 0.0));
        let summary = summarize(&rows);
        let mean = |model, n| {
            summary
                .iter()
                .find(|r| r.model == model && r.episodes == n)
                .unwrap()
                .mean_loss
        };
        for model in [ModelName::Rp, ModelName::Po] {
            assert!(
                mean(model, 10_000) <= mean(model, 10),
                "{tag} {model}: {} > {}",
                mean(model, 10_000),
                mean(model, 10)
            );
        }
        let baseline = mean(ModelName::RandomBaseline, 10);
        assert_eq!(baseline, mean(ModelName::RandomBaseline, 10_000));
    }
}
