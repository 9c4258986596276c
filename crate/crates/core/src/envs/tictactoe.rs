//! Tic-tac-toe from X's point of view. The opponent (O) is folded into the
//! transition kernel, so the game is an MDP over X-to-move positions plus one
//! absorbing terminal state.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::{Rng, RngCore};

use super::{
    check_discount, check_state, EnvTag, Environment, EpisodeEnd, OpponentKind, StepOutcome,
};
use crate::domain::{ActionId, ActionModel, StateId, TabularMdp};
use crate::eval::minimax::{minimax_solve, MinimaxTable};
use crate::{Error, Result};

pub const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

/// Line direction: 0 horizontal, 1 vertical, 2 diagonal.
pub const LINE_DIRECTION: [usize; 8] = [0, 0, 0, 1, 1, 1, 2, 2];

const fn line_mask(line: [usize; 3]) -> u16 {
    (1 << line[0]) | (1 << line[1]) | (1 << line[2])
}

const LINE_MASKS: [u16; 8] = {
    let mut masks = [0; 8];
    let mut i = 0;
    while i < 8 {
        masks[i] = line_mask(LINES[i]);
        i += 1;
    }
    masks
};

const FULL: u16 = 0x1ff;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    X,
    O,
}

impl Player {
    pub fn other(self) -> Self {
        match self {
            Player::X => Player::O,
            Player::O => Player::X,
        }
    }
}

/// Cells 0..9 in row-major order, as occupancy bitmasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Board {
    pub x: u16,
    pub o: u16,
}

impl Board {
    pub const EMPTY: Board = Board { x: 0, o: 0 };

    pub fn marks(&self, p: Player) -> u16 {
        match p {
            Player::X => self.x,
            Player::O => self.o,
        }
    }

    pub fn empty_mask(&self) -> u16 {
        FULL & !(self.x | self.o)
    }

    pub fn empty_cells(&self) -> Vec<usize> {
        (0..9)
            .filter(|&c| self.empty_mask() & (1 << c) != 0)
            .collect()
    }

    pub fn is_full(&self) -> bool {
        self.empty_mask() == 0
    }

    pub fn has_line(&self, p: Player) -> bool {
        let m = self.marks(p);
        LINE_MASKS.iter().any(|&l| m & l == l)
    }

    pub fn winner(&self) -> Option<Player> {
        if self.has_line(Player::X) {
            Some(Player::X)
        } else if self.has_line(Player::O) {
            Some(Player::O)
        } else {
            None
        }
    }

    pub fn is_over(&self) -> bool {
        self.winner().is_some() || self.is_full()
    }

    /// X moves first, so X is to move whenever the counts are equal.
    pub fn to_move(&self) -> Player {
        if self.x.count_ones() == self.o.count_ones() {
            Player::X
        } else {
            Player::O
        }
    }

    pub fn play(&self, cell: usize) -> Board {
        debug_assert!(self.empty_mask() & (1 << cell) != 0);
        match self.to_move() {
            Player::X => Board {
                x: self.x | 1 << cell,
                o: self.o,
            },
            Player::O => Board {
                x: self.x,
                o: self.o | 1 << cell,
            },
        }
    }

    /// 1 for X, -1 for O, 0 for empty.
    pub fn cell(&self, c: usize) -> i8 {
        if self.x & (1 << c) != 0 {
            1
        } else if self.o & (1 << c) != 0 {
            -1
        } else {
            0
        }
    }

    /// Base-3 code, with cell 0 as the least significant digit.
    pub fn code(&self) -> u32 {
        (0..9).rev().fold(0, |acc, c| {
            acc * 3
                + match self.cell(c) {
                    1 => 1,
                    -1 => 2,
                    _ => 0,
                }
        })
    }

    /// Rows of `X`, `O` and `.` separated by `/`.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(11);
        for c in 0..9 {
            if c > 0 && c % 3 == 0 {
                out.push('/');
            }
            out.push(match self.cell(c) {
                1 => 'X',
                -1 => 'O',
                _ => '.',
            });
        }
        out
    }

    pub fn parse(text: &str) -> Option<Board> {
        let cells: Vec<char> = text.chars().filter(|&c| c != '/').collect();
        if cells.len() != 9 {
            return None;
        }
        let mut b = Board::EMPTY;
        for (i, ch) in cells.into_iter().enumerate() {
            match ch {
                'X' => b.x |= 1 << i,
                'O' => b.o |= 1 << i,
                '.' => {}
                _ => return None,
            }
        }
        Some(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TicTacToeRewards {
    pub win: f64,
    pub loss: f64,
    pub draw: f64,
}

impl Default for TicTacToeRewards {
    fn default() -> Self {
        Self {
            win: 1.0,
            loss: -1.0,
            draw: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Opponent {
    /// Uniform over empty cells.
    Random,
    /// Uniform over O's minimax-optimal replies.
    Minimax,
}

/// X-to-move positions reachable under legal play from the empty board, in
/// increasing [`Board::code`] order.
pub fn x_to_move_positions() -> Vec<Board> {
    let mut seen = HashMap::new();
    let mut queue = VecDeque::from([Board::EMPTY]);
    seen.insert(Board::EMPTY, ());
    while let Some(b) = queue.pop_front() {
        for cx in b.empty_cells() {
            let after = b.play(cx);
            if after.is_over() {
                continue;
            }
            for co in after.empty_cells() {
                let next = after.play(co);
                if !next.is_over() && seen.insert(next, ()).is_none() {
                    queue.push_back(next);
                }
            }
        }
    }
    let mut boards: Vec<Board> = seen.into_keys().collect();
    boards.sort_by_key(Board::code);
    boards
}

#[derive(Debug, Clone)]
pub struct TicTacToeEnv {
    opponent: Opponent,
    rewards: TicTacToeRewards,
    discount: f64,
    boards: Arc<Vec<Board>>,
    index: Arc<HashMap<Board, StateId>>,
    minimax: Arc<MinimaxTable>,
}

impl TicTacToeEnv {
    pub fn new(opponent: Opponent, rewards: TicTacToeRewards) -> Self {
        let boards = x_to_move_positions();
        let index = boards.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        Self {
            opponent,
            rewards,
            discount: 1.0,
            boards: Arc::new(boards),
            index: Arc::new(index),
            minimax: Arc::new(minimax_solve()),
        }
    }

    /// Same positions and minimax table, different opponent.
    pub fn with_opponent(&self, opponent: Opponent) -> Self {
        Self {
            opponent,
            ..self.clone()
        }
    }

    pub fn with_discount(mut self, discount: f64) -> Result<Self> {
        self.discount = check_discount(discount)?;
        Ok(self)
    }

    pub fn opponent(&self) -> Opponent {
        self.opponent
    }

    pub fn minimax(&self) -> &MinimaxTable {
        &self.minimax
    }

    pub fn terminal(&self) -> StateId {
        self.boards.len()
    }

    pub fn start_state(&self) -> StateId {
        self.index[&Board::EMPTY]
    }

    /// `None` for the terminal state.
    pub fn board(&self, s: StateId) -> Option<Board> {
        self.boards.get(s).copied()
    }

    pub fn boards(&self) -> &[Board] {
        &self.boards
    }

    pub fn state_of(&self, b: &Board) -> Option<StateId> {
        self.index.get(b).copied()
    }

    /// Position after X plays `a`, before the opponent replies.
    pub fn afterstate(&self, s: StateId, a: ActionId) -> Result<Board> {
        check_state(s, self.n_states())?;
        let b = self.board(s).ok_or(Error::TerminalState(s))?;
        if a >= 9 || b.empty_mask() & (1 << a) == 0 {
            return Err(Error::IllegalAction {
                state: s,
                action: a,
            });
        }
        Ok(b.play(a))
    }

    fn replies(&self, b: &Board) -> Vec<usize> {
        match self.opponent {
            Opponent::Random => b.empty_cells(),
            Opponent::Minimax => self.minimax.optimal_moves(b),
        }
    }

    /// Expected-reward model and successor distribution of X playing `a` in `s`.
    fn outcome_model(&self, s: StateId, a: ActionId) -> Result<ActionModel> {
        let after = self.afterstate(s, a)?;
        if after.has_line(Player::X) {
            return Ok(ActionModel::new(self.rewards.win, [(self.terminal(), 1.0)]));
        }
        if after.is_full() {
            return Ok(ActionModel::new(
                self.rewards.draw,
                [(self.terminal(), 1.0)],
            ));
        }
        let replies = self.replies(&after);
        let q = 1.0 / replies.len() as f64;
        let mut reward = 0.0;
        let mut next = Vec::with_capacity(replies.len());
        for r in replies {
            let (n, rew) = self.resolve(after.play(r));
            reward += q * rew;
            next.push((n, q));
        }
        Ok(ActionModel::new(reward, next))
    }

    fn resolve(&self, b: Board) -> (StateId, f64) {
        if b.has_line(Player::O) {
            (self.terminal(), self.rewards.loss)
        } else if b.is_full() {
            (self.terminal(), self.rewards.draw)
        } else {
            (self.index[&b], 0.0)
        }
    }
}

impl Environment for TicTacToeEnv {
    fn tag(&self) -> EnvTag {
        EnvTag::TicTacToe(match self.opponent {
            Opponent::Random => OpponentKind::Random,
            Opponent::Minimax => OpponentKind::Minimax,
        })
    }

    fn n_states(&self) -> usize {
        self.boards.len() + 1
    }

    fn n_actions(&self) -> usize {
        9
    }

    fn is_terminal(&self, s: StateId) -> bool {
        s == self.terminal()
    }

    fn legal_actions(&self, s: StateId) -> Result<Vec<ActionId>> {
        check_state(s, self.n_states())?;
        Ok(self.board(s).ok_or(Error::TerminalState(s))?.empty_cells())
    }

    fn reset(&self, _: &mut dyn RngCore) -> StateId {
        self.start_state()
    }

    fn step(&self, s: StateId, a: ActionId, rng: &mut dyn RngCore) -> Result<StepOutcome> {
        let after = self.afterstate(s, a)?;
        let done = |reward| StepOutcome {
            next: self.terminal(),
            reward,
            done: true,
        };
        if after.has_line(Player::X) {
            return Ok(done(self.rewards.win));
        }
        if after.is_full() {
            return Ok(done(self.rewards.draw));
        }
        let replies = self.replies(&after);
        let reply = replies[rng.gen_range(0..replies.len())];
        let (next, reward) = self.resolve(after.play(reply));
        Ok(StepOutcome {
            next,
            reward,
            done: next == self.terminal(),
        })
    }

    fn exact_model(&self) -> TabularMdp {
        let n = self.n_states();
        let mut models = vec![None; n * 9];
        for s in 0..self.boards.len() {
            for a in self.boards[s].empty_cells() {
                models[s * 9 + a] = Some(self.outcome_model(s, a).expect("legal move"));
            }
        }
        let mut start = vec![0.0; n];
        start[self.start_state()] = 1.0;
        let mut terminal = vec![false; n];
        terminal[self.terminal()] = true;
        TabularMdp::new(n, 9, models, start, terminal, self.discount)
            .expect("tic-tac-toe model is well formed")
    }

    fn episode_end(&self) -> EpisodeEnd {
        EpisodeEnd::Terminal
    }
}
