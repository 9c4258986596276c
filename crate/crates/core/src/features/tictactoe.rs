use crate::envs::tictactoe::{Board, Player, LINES, LINE_DIRECTION};

const PLAYERS: [Player; 2] = [Player::X, Player::O];
const BASE_NAMES: [&str; 5] = [
    "singlets",
    "doublets",
    "triplets",
    "diversity",
    "crosspoints",
];

/// Number of base line features over both players.
pub const BASE_DIM: usize = 10;
/// Linear and quadratic monomials of the base features plus the nine cells.
pub const RAW_DIM: usize = BASE_DIM + BASE_DIM * (BASE_DIM + 1) / 2 + 9;

/// Singlets, doublets, triplets, diversity and crosspoints for X, then O.
///
/// A line counts for a player when it holds only that player's marks; a
/// crosspoint is an empty cell lying on at least two of that player's singlet
/// lines, and diversity is the number of directions among the singlet lines.
pub fn base_features(b: &Board) -> [f64; BASE_DIM] {
    let mut out = [0.0; BASE_DIM];
    for (k, &p) in PLAYERS.iter().enumerate() {
        let mine = b.marks(p);
        let theirs = b.marks(p.other());
        let mut counts = [0u32; 4];
        let mut directions = [false; 3];
        let mut singlet_hits = [0u32; 9];
        for (li, line) in LINES.iter().enumerate() {
            let mask: u16 = line.iter().map(|&c| 1u16 << c).sum();
            if mask & theirs != 0 {
                continue;
            }
            let n = (mask & mine).count_ones() as usize;
            counts[n] += 1;
            if n == 1 {
                directions[LINE_DIRECTION[li]] = true;
                for &c in line {
                    if mine & (1 << c) == 0 {
                        singlet_hits[c] += 1;
                    }
                }
            }
        }
        let crosspoints = singlet_hits.iter().filter(|&&h| h >= 2).count();
        let o = 5 * k;
        out[o] = f64::from(counts[1]);
        out[o + 1] = f64::from(counts[2]);
        out[o + 2] = f64::from(counts[3]);
        out[o + 3] = directions.iter().filter(|&&d| d).count() as f64;
        out[o + 4] = crosspoints as f64;
    }
    out
}

/// Base features, their pairwise products (squares included) and the raw
/// cells (X = 1, O = -1, empty = 0), before scaling and deduplication.
pub fn tictactoe_reward_features(b: &Board) -> Vec<f64> {
    let base = base_features(b);
    let mut f = Vec::with_capacity(RAW_DIM);
    f.extend_from_slice(&base);
    for i in 0..BASE_DIM {
        for j in i..BASE_DIM {
            f.push(base[i] * base[j]);
        }
    }
    f.extend((0..9).map(|c| f64::from(b.cell(c))));
    f
}

pub(crate) fn names() -> Vec<String> {
    let base: Vec<String> = ["x", "o"]
        .iter()
        .flat_map(|p| BASE_NAMES.iter().map(move |n| format!("{p}_{n}")))
        .collect();
    let mut names = base.clone();
    for i in 0..BASE_DIM {
        for j in i..BASE_DIM {
            names.push(format!("{}*{}", base[i], base[j]));
        }
    }
    names.extend((0..9).map(|c| format!("cell{c}")));
    names
}
