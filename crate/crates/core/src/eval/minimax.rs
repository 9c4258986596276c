//! Exhaustive negamax over every legal tic-tac-toe position.

use std::collections::HashMap;

use crate::envs::tictactoe::{Board, Player};

/// Game values from the point of view of the player to move: +1 win, 0 draw, -1 loss.
#[derive(Debug, Clone)]
pub struct MinimaxTable {
    values: HashMap<Board, i8>,
}

pub fn minimax_solve() -> MinimaxTable {
    let mut values = HashMap::new();
    negamax(Board::EMPTY, &mut values);
    MinimaxTable { values }
}

fn terminal_value(b: &Board) -> Option<i8> {
    if b.winner().is_some() {
        // the previous mover completed a line
        Some(-1)
    } else if b.is_full() {
        Some(0)
    } else {
        None
    }
}

fn negamax(b: Board, memo: &mut HashMap<Board, i8>) -> i8 {
    if let Some(&v) = memo.get(&b) {
        return v;
    }
    let v = terminal_value(&b).unwrap_or_else(|| {
        b.empty_cells()
            .into_iter()
            .map(|c| -negamax(b.play(c), memo))
            .max()
            .expect("non-terminal board has a move")
    });
    memo.insert(b, v);
    v
}

impl MinimaxTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value for the player to move. Panics on positions unreachable by legal play.
    pub fn value(&self, b: &Board) -> i8 {
        self.values[b]
    }

    pub fn value_for(&self, b: &Board, player: Player) -> i8 {
        if b.to_move() == player {
            self.value(b)
        } else {
            -self.value(b)
        }
    }

    /// Every move achieving the position's value; empty when the game is over.
    pub fn optimal_moves(&self, b: &Board) -> Vec<usize> {
        if b.is_over() {
            return Vec::new();
        }
        let v = self.value(b);
        b.empty_cells()
            .into_iter()
            .filter(|&c| -self.value(&b.play(c)) == v)
            .collect()
    }

    pub fn positions(&self) -> impl Iterator<Item = (&Board, i8)> {
        self.values.iter().map(|(b, &v)| (b, v))
    }
}
