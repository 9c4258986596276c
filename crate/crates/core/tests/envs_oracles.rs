mod common;

use std::collections::HashMap;

use common::*;
use irl::domain::{StateId, TabularPolicy};
use irl::envs::blackjack::{self, BlackjackEnv, BlackjackState, Deal};
use irl::envs::gridworld::{self, GridworldConfig, GridworldEnv};
use irl::envs::{Environment, Opponent, TicTacToeEnv, TicTacToeRewards};
use rand::Rng;

/// Total variation between the empirical successor distribution of `n`
/// sampled steps and the exact model.
fn tv_distance(env: &dyn Environment, s: StateId, a: usize, n: usize, rng: &mut impl Rng) -> f64 {
    let mdp = env.exact_model();
    let model = mdp.model(s, a).expect("legal pair");
    let mut counts: HashMap<StateId, usize> = HashMap::new();
    for _ in 0..n {
        *counts.entry(env.step(s, a, rng).unwrap().next).or_default() += 1;
    }
    let mut tv = 0.0;
    for &(t, p) in &model.next {
        tv += (p - counts.remove(&t).unwrap_or(0) as f64 / n as f64).abs();
    }
    tv += counts.values().map(|&c| c as f64 / n as f64).sum::<f64>();
    tv / 2.0
}

fn mean_sampled_reward(
    env: &dyn Environment,
    s: StateId,
    a: usize,
    n: usize,
    rng: &mut impl Rng,
) -> (f64, f64) {
    let xs: Vec<f64> = (0..n)
        .map(|_| env.step(s, a, rng).unwrap().reward)
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

// Card ranks 1..=10, tens weighted four times.
fn card_p(c: u8) -> f64 {
    if c == 10 {
        4.0 / 13.0
    } else {
        1.0 / 13.0
    }
}

fn best_total(hard: u8, ace: bool) -> (u8, bool) {
    if ace && hard + 10 <= 21 {
        (hard + 10, true)
    } else {
        (hard, false)
    }
}

#[test]
fn blackjack_start_distribution_matches_enumeration() {
    // Enumerate card sequences directly: two player cards, one dealer card,
    // then hit while the best total is below 12.
    fn extend(hard: u8, ace: bool, p: f64, out: &mut HashMap<(u8, bool), f64>) {
        let (total, usable) = best_total(hard, ace);
        if total >= 12 {
            *out.entry((total, usable)).or_default() += p;
            return;
        }
        for c in 1..=10 {
            extend(hard + c, ace || c == 1, p * card_p(c), out);
        }
    }
    let mut player = HashMap::new();
    let mut natural = 0.0;
    for a in 1..=10u8 {
        for b in 1..=10u8 {
            let p = card_p(a) * card_p(b);
            if best_total(a + b, a == 1 || b == 1).0 == 21 {
                natural += p;
            } else {
                extend(a + b, a == 1 || b == 1, p, &mut player);
            }
        }
    }
    assert!((natural - BlackjackEnv::natural_probability()).abs() < 1e-15);
    let start = BlackjackEnv::start_distribution();
    assert_eq!(start.len(), blackjack::N_STATES);
    assert_eq!(start[blackjack::TERMINAL], 0.0);
    let mut total = 0.0;
    for st in BlackjackState::all() {
        let expected = player
            .get(&(st.player_sum, st.usable_ace))
            .copied()
            .unwrap_or(0.0)
            * card_p(st.dealer_card)
            / (1.0 - natural);
        assert!((start[st.index()] - expected).abs() < 1e-14, "{st:?}");
        total += start[st.index()];
    }
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn blackjack_deals_match_start_distribution() {
    let env = BlackjackEnv::new();
    let start = BlackjackEnv::start_distribution();
    let mut r = rng(20);
    let n = 400_000;
    let mut counts = vec![0usize; blackjack::N_STATES];
    let mut naturals = 0usize;
    for _ in 0..n {
        match env.deal(&mut r) {
            Deal::Natural { .. } => naturals += 1,
            Deal::Decision(s) => counts[s] += 1,
        }
    }
    let p = BlackjackEnv::natural_probability();
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((naturals as f64 / n as f64 - p).abs() < 4.0 * se);
    let decisions = (n - naturals) as f64;
    let tv: f64 = counts
        .iter()
        .zip(&start)
        .map(|(&c, &q)| (c as f64 / decisions - q).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv < 0.01, "tv {tv}");
}

#[test]
fn blackjack_sampled_transitions_match_model() {
    let env = BlackjackEnv::new();
    let mut r = rng(21);
    for s in 0..blackjack::TERMINAL {
        for a in [blackjack::HIT, blackjack::STICK] {
            let tv = tv_distance(&env, s, a, 100_000, &mut r);
            assert!(tv < 0.01, "state {s} action {a}: tv {tv}");
        }
    }
}

#[test]
fn blackjack_sampled_rewards_match_model() {
    let env = BlackjackEnv::new();
    let mdp = env.exact_model();
    let mut r = rng(22);
    for s in (0..blackjack::TERMINAL).step_by(7) {
        for a in [blackjack::HIT, blackjack::STICK] {
            let (mean, se) = mean_sampled_reward(&env, s, a, 50_000, &mut r);
            let exact = mdp.model(s, a).unwrap().reward;
            assert!(
                (mean - exact).abs() < 4.0 * se + 1e-12,
                "state {s} action {a}: {mean} vs {exact}"
            );
        }
    }
}

#[test]
fn gridworld_sampled_transitions_match_model() {
    let env = GridworldEnv::new(GridworldConfig::default()).unwrap();
    let mut r = rng(23);
    let n = env.n_states();
    let states = [
        0,
        1,
        31,
        32,
        33,
        n / 2 + 7,
        n - 32,
        n - 1,
        8 * 32 + 8,
        7 * 32 + 7,
    ];
    for s in states {
        for a in 0..5 {
            let tv = tv_distance(&env, s, a, 100_000, &mut r);
            assert!(tv < 0.01, "state {s} action {a}: tv {tv}");
        }
    }
}

#[test]
fn gridworld_east_move_probability() {
    let env = GridworldEnv::new(GridworldConfig::default()).unwrap();
    let mdp = env.exact_model();
    let s = env.state(10, 10);
    let east = env.state(11, 10);
    let model = mdp.model(s, gridworld::EAST).unwrap();
    let p = model.next.iter().find(|(t, _)| *t == east).unwrap().1;
    assert!((p - 0.76).abs() < 1e-12);
    assert!((model.next.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() < 1e-12);
    let mut r = rng(24);
    let n = 200_000;
    let hits = (0..n)
        .filter(|_| env.step(s, gridworld::EAST, &mut r).unwrap().next == east)
        .count();
    let se = (0.76f64 * 0.24 / n as f64).sqrt();
    assert!((hits as f64 / n as f64 - 0.76).abs() < 4.0 * se);
}

#[test]
fn gridworld_start_is_uniform() {
    let env = GridworldEnv::new(GridworldConfig::default()).unwrap();
    let mdp = env.exact_model();
    assert!(mdp
        .start()
        .iter()
        .all(|&p| (p - 1.0 / 1024.0).abs() < 1e-15));
    let mut r = rng(25);
    let n = 1_024_000;
    let mut counts = vec![0usize; 1024];
    for _ in 0..n {
        counts[env.reset(&mut r)] += 1;
    }
    let tv: f64 = counts
        .iter()
        .map(|&c| (c as f64 / n as f64 - 1.0 / 1024.0).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv < 0.02, "tv {tv}");
}

#[test]
fn tictactoe_sampled_transitions_match_model() {
    for opponent in [Opponent::Random, Opponent::Minimax] {
        let env = TicTacToeEnv::new(opponent, TicTacToeRewards::default());
        let mut r = rng(26);
        for s in (0..env.terminal()).step_by(61) {
            for a in env.legal_actions(s).unwrap() {
                let tv = tv_distance(&env, s, a, 100_000, &mut r);
                assert!(tv < 0.01, "state {s} action {a}: tv {tv}");
            }
        }
    }
}

#[test]
fn minimax_x_never_loses() {
    for opponent in [Opponent::Random, Opponent::Minimax] {
        let env = TicTacToeEnv::new(opponent, TicTacToeRewards::default());
        let minimax = env.minimax();
        let subsets: Vec<Vec<usize>> = (0..env.n_states())
            .map(|s| {
                env.board(s)
                    .map(|b| minimax.optimal_moves(&b))
                    .unwrap_or_default()
            })
            .collect();
        let expert = TabularPolicy::uniform_over(&env.action_sets(), &subsets);
        let mut r = rng(27);
        for _ in 0..5_000 {
            let mut s = env.start_state();
            loop {
                let out = env.step(s, expert.sample(s, &mut r), &mut r).unwrap();
                assert!(
                    out.reward >= 0.0,
                    "X lost from {}",
                    env.board(s).unwrap().render()
                );
                if out.done {
                    break;
                }
                s = out.next;
            }
        }
    }
}

/// Independent infinite-deck expectimax: value of a player total against a
/// dealer upcard, recomputing the dealer's play from scratch.
fn dealer_final(hard: u8, ace: bool, memo: &mut HashMap<(u8, bool), [f64; 23]>) -> [f64; 23] {
    if let Some(v) = memo.get(&(hard, ace)) {
        return *v;
    }
    let (total, _) = best_total(hard, ace);
    let mut out = [0.0; 23];
    if total >= 17 {
        out[total.min(22) as usize] = 1.0;
    } else {
        for c in 1..=10 {
            let sub = dealer_final(hard + c, ace || c == 1, memo);
            for (o, x) in out.iter_mut().zip(sub) {
                *o += card_p(c) * x;
            }
        }
    }
    memo.insert((hard, ace), out);
    out
}

fn stick_value(player: u8, dealer: u8, memo: &mut HashMap<(u8, bool), [f64; 23]>) -> f64 {
    let dist = dealer_final(dealer, dealer == 1, memo);
    (17..=22)
        .map(|t| {
            let outcome = if t == 22 || player > t {
                1.0
            } else if player == t {
                0.0
            } else {
                -1.0
            };
            dist[t as usize] * outcome
        })
        .sum()
}

fn best_value(
    hard: u8,
    ace: bool,
    dealer: u8,
    memo: &mut HashMap<(u8, bool), [f64; 23]>,
) -> (f64, f64) {
    let (total, _) = best_total(hard, ace);
    let stick = stick_value(total, dealer, memo);
    let mut hit = 0.0;
    for c in 1..=10 {
        let (h, a) = (hard + c, ace || c == 1);
        hit += card_p(c)
            * if h > 21 {
                -1.0
            } else {
                let (s, t) = best_value(h, a, dealer, memo);
                s.max(t)
            };
    }
    (stick, hit)
}

#[test]
fn blackjack_optimal_policy_matches_expectimax() {
    let exp = experiment(irl::envs::EnvTag::Blackjack);
    let mut memo = HashMap::new();
    for st in BlackjackState::all() {
        let hard = if st.usable_ace {
            st.player_sum - 10
        } else {
            st.player_sum
        };
        let (stick, hit) = best_value(hard, st.usable_ace, st.dealer_card, &mut memo);
        assert!(
            (exp.v_star.v[st.index()] - stick.max(hit)).abs() < 1e-12,
            "{st:?}"
        );
        if (stick - hit).abs() > 1e-9 {
            let expected = if stick > hit {
                blackjack::STICK
            } else {
                blackjack::HIT
            };
            assert_eq!(exp.expert.prob(st.index(), expected), 1.0, "{st:?}");
        }
    }
    for dealer in 1..=10 {
        let s = BlackjackState {
            player_sum: 20,
            dealer_card: dealer,
            usable_ace: false,
        }
        .index();
        assert_eq!(exp.expert.prob(s, blackjack::STICK), 1.0);
    }
}
