use crate::domain::StateId;
use crate::envs::BlackjackState;

pub(crate) const BASE_NAMES: [&str; 10] =
    ["bias", "p", "d", "u", "p2", "d2", "u2", "pd", "pu", "du"];
pub(crate) const EXTENDED_NAMES: [&str; 4] = ["pdu", "p3", "d3", "natural_reachable"];

/// Bias and degree-≤2 monomials of the normalized player sum `p`, dealer card
/// `d` and usable-ace flag `u`; optionally four extra terms. Terminal → zeros.
pub fn blackjack_reward_features(s: StateId, extended: bool) -> Vec<f64> {
    let dim = if extended { 14 } else { 10 };
    let Some(st) = BlackjackState::from_index(s) else {
        return vec![0.0; dim];
    };
    let p = (f64::from(st.player_sum) - 12.0) / 9.0;
    let d = (f64::from(st.dealer_card) - 1.0) / 9.0;
    let u = f64::from(u8::from(st.usable_ace));
    let mut f = vec![1.0, p, d, u, p * p, d * d, u * u, p * d, p * u, d * u];
    if extended {
        let natural = st.player_sum == 21 && st.usable_ace;
        f.extend([
            p * d * u,
            p * p * p,
            d * d * d,
            f64::from(u8::from(natural)),
        ]);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::blackjack::TERMINAL;

    #[test]
    fn terminal_is_zero() {
        assert_eq!(blackjack_reward_features(TERMINAL, false), vec![0.0; 10]);
        assert_eq!(blackjack_reward_features(TERMINAL, true), vec![0.0; 14]);
    }

    #[test]
    fn bias_is_one_and_components_in_unit_interval() {
        for st in BlackjackState::all() {
            let f = blackjack_reward_features(st.index(), true);
            assert_eq!(f[0], 1.0);
            assert!(f.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }

    #[test]
    fn degree_two_monomial_count() {
        // monomials x^i y^j z^k with i + j + k <= 2 over three variables
        let mut count = 0;
        for i in 0..=2 {
            for j in 0..=2 {
                for k in 0..=2 {
                    if i + j + k <= 2 {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 10);
        assert_eq!(BASE_NAMES.len(), count);
    }
}
