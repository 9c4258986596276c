//! Infinite-deck blackjack. The player decides only with sums 12..=21; lower
//! sums are hit automatically while dealing.

use rand::{Rng, RngCore};

use super::{check_discount, check_state, EnvTag, Environment, EpisodeEnd, StepOutcome};
use crate::domain::{ActionId, ActionModel, StateId, TabularMdp};
use crate::{Error, Result};

pub const HIT: ActionId = 0;
pub const STICK: ActionId = 1;

pub const N_STATES: usize = 201;
pub const TERMINAL: StateId = 200;
pub const NATURAL_REWARD: f64 = 1.5;

/// Probability of drawing a card of value 1 (ace) ..= 10, indexed by value.
pub fn card_probability(value: u8) -> f64 {
    match value {
        1..=9 => 1.0 / 13.0,
        10 => 4.0 / 13.0,
        _ => 0.0,
    }
}

fn draw_card(rng: &mut dyn RngCore) -> u8 {
    // 13 ranks, face cards count as 10
    rng.gen_range(1u8..=13).min(10)
}

/// Best hand value given the hard total (aces as 1) and whether an ace is held.
fn hand_value(hard: u8, has_ace: bool) -> (u8, bool) {
    if has_ace && hard + 10 <= 21 {
        (hard + 10, true)
    } else {
        (hard, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlackjackState {
    pub player_sum: u8,
    pub dealer_card: u8,
    pub usable_ace: bool,
}

impl BlackjackState {
    pub fn index(self) -> StateId {
        ((usize::from(self.player_sum) - 12) * 10 + usize::from(self.dealer_card) - 1) * 2
            + usize::from(self.usable_ace)
    }

    /// `None` for the terminal state.
    pub fn from_index(s: StateId) -> Option<Self> {
        if s >= TERMINAL {
            return None;
        }
        Some(Self {
            player_sum: (s / 20) as u8 + 12,
            dealer_card: ((s / 2) % 10) as u8 + 1,
            usable_ace: s % 2 == 1,
        })
    }

    pub fn all() -> impl Iterator<Item = Self> {
        (0..TERMINAL).filter_map(Self::from_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deal {
    /// Two-card 21, settled at once with [`NATURAL_REWARD`].
    Natural {
        dealer_card: u8,
    },
    Decision(StateId),
}

/// Dealer's final outcome probabilities: index 0..=4 for totals 17..=21, 5 for bust.
fn dealer_outcomes(hard: u8, has_ace: bool) -> [f64; 6] {
    let (value, _) = hand_value(hard, has_ace);
    let mut out = [0.0; 6];
    if value >= 17 {
        if value > 21 {
            out[5] = 1.0;
        } else {
            out[usize::from(value - 17)] = 1.0;
        }
        return out;
    }
    for card in 1..=10u8 {
        let p = card_probability(card);
        let sub = dealer_outcomes(hard + card, has_ace || card == 1);
        for (o, q) in out.iter_mut().zip(sub) {
            *o += p * q;
        }
    }
    out
}

fn settle(player: u8, dealer: Option<u8>) -> f64 {
    match dealer {
        None => 1.0,
        Some(d) if player > d => 1.0,
        Some(d) if player == d => 0.0,
        Some(_) => -1.0,
    }
}

#[derive(Debug, Clone)]
pub struct BlackjackEnv {
    discount: f64,
    stick_reward: [[f64; 10]; 10],
}

impl Default for BlackjackEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl BlackjackEnv {
    pub fn new() -> Self {
        let mut stick_reward = [[0.0; 10]; 10];
        for d in 1..=10u8 {
            let outcomes = dealer_outcomes(d, d == 1);
            for p in 12..=21u8 {
                let mut r = outcomes[5] * settle(p, None);
                for (i, &q) in outcomes[..5].iter().enumerate() {
                    r += q * settle(p, Some(17 + i as u8));
                }
                stick_reward[usize::from(p - 12)][usize::from(d - 1)] = r;
            }
        }
        Self {
            discount: 1.0,
            stick_reward,
        }
    }

    pub fn with_discount(mut self, discount: f64) -> Result<Self> {
        self.discount = check_discount(discount)?;
        Ok(self)
    }

    /// Expected reward of sticking with `player_sum` against `dealer_card`.
    pub fn stick_reward(&self, player_sum: u8, dealer_card: u8) -> f64 {
        self.stick_reward[usize::from(player_sum - 12)][usize::from(dealer_card - 1)]
    }

    pub fn natural_probability() -> f64 {
        2.0 * card_probability(1) * card_probability(10)
    }

    /// Deals two player cards and the dealer's upcard, auto-hitting below 12.
    pub fn deal(&self, rng: &mut dyn RngCore) -> Deal {
        let c1 = draw_card(rng);
        let c2 = draw_card(rng);
        let dealer_card = draw_card(rng);
        let mut hard = c1 + c2;
        let mut has_ace = c1 == 1 || c2 == 1;
        if hand_value(hard, has_ace).0 == 21 {
            return Deal::Natural { dealer_card };
        }
        while hand_value(hard, has_ace).0 < 12 {
            let c = draw_card(rng);
            hard += c;
            has_ace |= c == 1;
        }
        let (player_sum, usable_ace) = hand_value(hard, has_ace);
        Deal::Decision(
            BlackjackState {
                player_sum,
                dealer_card,
                usable_ace,
            }
            .index(),
        )
    }

    /// Exact distribution of the first decision state, conditioned on no natural.
    pub fn start_distribution() -> Vec<f64> {
        fn auto_hit(hard: u8, has_ace: bool, p: f64, out: &mut [f64; 20 * 2]) {
            let (value, usable) = hand_value(hard, has_ace);
            if value >= 12 {
                out[usize::from(value - 12) * 2 + usize::from(usable)] += p;
                return;
            }
            for c in 1..=10u8 {
                auto_hit(hard + c, has_ace || c == 1, p * card_probability(c), out);
            }
        }
        let mut player = [0.0; 20 * 2];
        for c1 in 1..=10u8 {
            for c2 in 1..=10u8 {
                let p = card_probability(c1) * card_probability(c2);
                let has_ace = c1 == 1 || c2 == 1;
                if hand_value(c1 + c2, has_ace).0 == 21 {
                    continue;
                }
                auto_hit(c1 + c2, has_ace, p, &mut player);
            }
        }
        let norm = 1.0 - Self::natural_probability();
        let mut mu = vec![0.0; N_STATES];
        for state in BlackjackState::all() {
            let p = player[usize::from(state.player_sum - 12) * 2 + usize::from(state.usable_ace)];
            mu[state.index()] = p * card_probability(state.dealer_card) / norm;
        }
        mu
    }

    fn hit_successor(state: BlackjackState, card: u8) -> Option<BlackjackState> {
        let sum = state.player_sum + card;
        match (sum <= 21, state.usable_ace) {
            (true, usable) => Some(BlackjackState {
                player_sum: sum,
                usable_ace: usable,
                ..state
            }),
            (false, true) => Some(BlackjackState {
                player_sum: sum - 10,
                usable_ace: false,
                ..state
            }),
            (false, false) => None,
        }
    }

    fn decode(&self, s: StateId, a: ActionId) -> Result<BlackjackState> {
        check_state(s, N_STATES)?;
        let state = BlackjackState::from_index(s).ok_or(Error::TerminalState(s))?;
        if a > STICK {
            return Err(Error::IllegalAction {
                state: s,
                action: a,
            });
        }
        Ok(state)
    }
}

impl Environment for BlackjackEnv {
    fn tag(&self) -> EnvTag {
        EnvTag::Blackjack
    }

    fn n_states(&self) -> usize {
        N_STATES
    }

    fn n_actions(&self) -> usize {
        2
    }

    fn is_terminal(&self, s: StateId) -> bool {
        s == TERMINAL
    }

    fn legal_actions(&self, s: StateId) -> Result<Vec<ActionId>> {
        check_state(s, N_STATES)?;
        if s == TERMINAL {
            return Err(Error::TerminalState(s));
        }
        Ok(vec![HIT, STICK])
    }

    fn reset(&self, rng: &mut dyn RngCore) -> StateId {
        loop {
            if let Deal::Decision(s) = self.deal(rng) {
                return s;
            }
        }
    }

    fn step(&self, s: StateId, a: ActionId, rng: &mut dyn RngCore) -> Result<StepOutcome> {
        let state = self.decode(s, a)?;
        let terminal = |reward| StepOutcome {
            next: TERMINAL,
            reward,
            done: true,
        };
        if a == HIT {
            return Ok(match Self::hit_successor(state, draw_card(rng)) {
                Some(next) => StepOutcome {
                    next: next.index(),
                    reward: 0.0,
                    done: false,
                },
                None => terminal(-1.0),
            });
        }
        let mut hard = state.dealer_card;
        let mut has_ace = state.dealer_card == 1;
        while hand_value(hard, has_ace).0 < 17 {
            let c = draw_card(rng);
            hard += c;
            has_ace |= c == 1;
        }
        let dealer = hand_value(hard, has_ace).0;
        Ok(terminal(settle(
            state.player_sum,
            (dealer <= 21).then_some(dealer),
        )))
    }

    fn exact_model(&self) -> TabularMdp {
        let mut models = vec![None; N_STATES * 2];
        for state in BlackjackState::all() {
            let s = state.index();
            let mut next = Vec::new();
            let mut bust = 0.0;
            for card in 1..=10u8 {
                let p = card_probability(card);
                match Self::hit_successor(state, card) {
                    Some(n) => next.push((n.index(), p)),
                    None => {
                        bust += p;
                        next.push((TERMINAL, p));
                    }
                }
            }
            models[s * 2 + HIT] = Some(ActionModel::new(-bust, next));
            models[s * 2 + STICK] = Some(ActionModel::new(
                self.stick_reward(state.player_sum, state.dealer_card),
                [(TERMINAL, 1.0)],
            ));
        }
        let mut terminal = vec![false; N_STATES];
        terminal[TERMINAL] = true;
        TabularMdp::new(
            N_STATES,
            2,
            models,
            Self::start_distribution(),
            terminal,
            self.discount,
        )
        .expect("blackjack model is well formed")
    }

    fn episode_end(&self) -> EpisodeEnd {
        EpisodeEnd::Terminal
    }
}
