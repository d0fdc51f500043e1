//! Optimal-play oracles used for decision optimality.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use super::AnalysisError;
use crate::engine::{
    default_registry, ActionId, Cell, GameSpec, GameState, GridKind, JointAction, MatrixKind, Payload,
    PlayerId,
};
use crate::runner::MoveRecord;

const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

/// Cells as 0 (empty), 1 (x), 2 (o).
type Board = [u8; 9];

fn key(b: &Board) -> usize {
    b.iter().fold(0, |k, &c| k * 3 + c as usize)
}

fn has_line(b: &Board, piece: u8) -> bool {
    LINES.iter().any(|l| l.iter().all(|&i| b[i] == piece))
}

fn mover(b: &Board) -> u8 {
    let filled = b.iter().filter(|&&c| c != 0).count();
    if filled % 2 == 0 {
        1
    } else {
        2
    }
}

struct Table(Vec<i8>);

const UNSEEN: i8 = i8::MIN;

impl Table {
    /// Value for the side to move at a non-terminal board.
    fn value(&mut self, b: &mut Board) -> i8 {
        let k = key(b);
        if self.0[k] != UNSEEN {
            return self.0[k];
        }
        let me = mover(b);
        let mut best = -1;
        for i in 0..9 {
            if b[i] != 0 {
                continue;
            }
            b[i] = me;
            let v = if has_line(b, me) {
                1
            } else if b.iter().all(|&c| c != 0) {
                0
            } else {
                -self.value(b)
            };
            b[i] = 0;
            best = best.max(v);
            if best == 1 {
                break;
            }
        }
        self.0[k] = best;
        best
    }
}

fn table() -> &'static Vec<i8> {
    static TABLE: OnceLock<Vec<i8>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Table(vec![UNSEEN; 3usize.pow(9)]);
        // Visit every reachable position so lookups never miss.
        fn walk(t: &mut Table, b: &mut Board) {
            t.value(b);
            let me = mover(b);
            for i in 0..9 {
                if b[i] == 0 {
                    b[i] = me;
                    if !has_line(b, me) && b.iter().any(|&c| c == 0) {
                        walk(t, b);
                    }
                    b[i] = 0;
                }
            }
        }
        walk(&mut t, &mut [0; 9]);
        t.0
    })
}

fn board_of(state: &GameState) -> Result<Board, AnalysisError> {
    match state.payload() {
        Payload::Grid(g) if g.kind == GridKind::TicTacToe => {
            let mut b = [0u8; 9];
            for (i, c) in g.cells.iter().enumerate() {
                b[i] = match c {
                    Cell::Empty => 0,
                    Cell::X => 1,
                    Cell::O => 2,
                };
            }
            Ok(b)
        }
        _ => Err(AnalysisError::Unsupported(state.spec().name.clone())),
    }
}

/// Game-theoretic value for the side to move (+1 win, 0 draw, -1 loss)
/// and the actions that achieve it.
pub fn minimax_optimal_actions(state: &GameState) -> Result<(i8, Vec<ActionId>), AnalysisError> {
    let b = board_of(state)?;
    if state.is_terminal() {
        return Err(AnalysisError::Contract("state is terminal".into()));
    }
    let t = table();
    let me = mover(&b);
    let mut scored = Vec::new();
    for i in (0..9).filter(|&i| b[i] == 0) {
        let mut next = b;
        next[i] = me;
        let v = if has_line(&next, me) {
            1
        } else if next.iter().all(|&c| c != 0) {
            0
        } else {
            -t[key(&next)]
        };
        scored.push((ActionId(i as u32), v));
    }
    let best = scored.iter().map(|&(_, v)| v).max().expect("non-terminal board has a move");
    Ok((best, scored.into_iter().filter(|&(_, v)| v == best).map(|(a, _)| a).collect()))
}

/// Optimal action set for `player` at `state`, or `None` where the game
/// has no pure-strategy oracle.
pub fn optimal_actions(state: &GameState, player: PlayerId) -> Result<Option<Vec<ActionId>>, AnalysisError> {
    match state.payload() {
        Payload::Grid(g) if g.kind == GridKind::TicTacToe => {
            let _ = player;
            minimax_optimal_actions(state).map(|(_, a)| Some(a))
        }
        Payload::Matrix(m) => match m.kind {
            MatrixKind::PrisonersDilemma(p) if p.defect_dominant() => Ok(Some(vec![ActionId(1)])),
            _ => Ok(None),
        },
        _ => Ok(None),
    }
}

/// Per-player `(optimal, total)` move counts over one episode, replayed
/// from its records. Illegal proposals count as non-optimal. Players of a
/// game without an oracle are absent.
pub fn episode_optimality(
    spec: &GameSpec,
    seed: u64,
    moves: &[MoveRecord],
) -> Result<BTreeMap<PlayerId, (usize, usize)>, AnalysisError> {
    let mut state = default_registry().reset(spec, seed)?;
    let mut tally: BTreeMap<PlayerId, (usize, usize)> = BTreeMap::new();
    let mut i = 0;
    while i < moves.len() {
        let turn = moves[i].turn;
        let group: Vec<&MoveRecord> = moves[i..].iter().take_while(|m| m.turn == turn).collect();
        i += group.len();
        let mut joint = JointAction::new();
        for m in &group {
            if let Some(set) = optimal_actions(&state, m.player)? {
                let e = tally.entry(m.player).or_default();
                e.1 += 1;
                if !m.illegal && m.action >= 0 && set.contains(&ActionId(m.action as u32)) {
                    e.0 += 1;
                }
            }
            if m.action >= 0 {
                joint.insert(m.player, ActionId(m.action as u32));
            }
        }
        if state.is_terminal() || i >= moves.len() {
            break;
        }
        match state.apply(&joint) {
            Ok(step) => state = step.state,
            // A forfeiting move ends the record; nothing follows it.
            Err(_) => break,
        }
    }
    Ok(tally)
}

/// Fraction of `player`'s moves in the optimal set; `None` if undefined.
pub fn decision_optimality(
    spec: &GameSpec,
    seed: u64,
    moves: &[MoveRecord],
    player: PlayerId,
) -> Result<Option<f64>, AnalysisError> {
    Ok(episode_optimality(spec, seed, moves)?
        .get(&player)
        .filter(|(_, n)| *n > 0)
        .map(|&(k, n)| k as f64 / n as f64))
}
