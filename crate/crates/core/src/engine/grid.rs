//! Tic-tac-toe and Connect Four on a shared row-major grid.

use serde_json::json;

use super::{
    ActionId, EngineError, Game, GameMetadata, GameSpec, JointAction, Payload, PlayerId, Rewards,
    Transition,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Empty,
    X,
    O,
}

impl Cell {
    pub fn glyph(self) -> char {
        match self {
            Cell::Empty => '.',
            Cell::X => 'x',
            Cell::O => 'o',
        }
    }

    pub fn of_player(player: PlayerId) -> Cell {
        if player == 0 {
            Cell::X
        } else {
            Cell::O
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridKind {
    TicTacToe,
    ConnectFour,
}

impl GridKind {
    pub fn rows(self) -> usize {
        match self {
            GridKind::TicTacToe => 3,
            GridKind::ConnectFour => 6,
        }
    }

    pub fn cols(self) -> usize {
        match self {
            GridKind::TicTacToe => 3,
            GridKind::ConnectFour => 7,
        }
    }

    fn line(self) -> usize {
        match self {
            GridKind::TicTacToe => 3,
            GridKind::ConnectFour => 4,
        }
    }
}

/// Row-major cells, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridBoard {
    pub kind: GridKind,
    pub cells: Vec<Cell>,
    /// Player to move; 0 plays `x`.
    pub current: PlayerId,
}

impl GridBoard {
    pub fn empty(kind: GridKind) -> Self {
        Self {
            kind,
            cells: vec![Cell::Empty; kind.rows() * kind.cols()],
            current: 0,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.kind.cols() + col]
    }

    pub fn legal(&self) -> Vec<ActionId> {
        match self.kind {
            GridKind::TicTacToe => (0..9)
                .filter(|&i| self.cells[i] == Cell::Empty)
                .map(|i| ActionId(i as u32))
                .collect(),
            GridKind::ConnectFour => (0..self.kind.cols())
                .filter(|&c| self.get(0, c) == Cell::Empty)
                .map(|c| ActionId(c as u32))
                .collect(),
        }
    }

    /// Index of the cell an action fills.
    fn target(&self, action: ActionId) -> usize {
        let cols = self.kind.cols();
        match self.kind {
            GridKind::TicTacToe => action.0 as usize,
            GridKind::ConnectFour => {
                let col = action.0 as usize;
                let row = (0..self.kind.rows())
                    .rev()
                    .find(|&r| self.get(r, col) == Cell::Empty)
                    .expect("column has space");
                row * cols + col
            }
        }
    }

    /// Whether the piece at `idx` completes a line.
    fn completes_line(&self, idx: usize) -> bool {
        let (rows, cols) = (self.kind.rows() as isize, self.kind.cols() as isize);
        let need = self.kind.line();
        let piece = self.cells[idx];
        let (r0, c0) = ((idx as isize) / cols, (idx as isize) % cols);
        let count = |dr: isize, dc: isize| {
            let mut n = 0;
            let (mut r, mut c) = (r0 + dr, c0 + dc);
            while r >= 0 && r < rows && c >= 0 && c < cols && self.cells[(r * cols + c) as usize] == piece
            {
                n += 1;
                r += dr;
                c += dc;
            }
            n
        };
        [(0, 1), (1, 0), (1, 1), (1, -1)]
            .iter()
            .any(|&(dr, dc)| 1 + count(dr, dc) + count(-dr, -dc) >= need)
    }

    /// Places the current player's piece. Returns the winner if the move ends
    /// the game with a line, and whether the board is now terminal.
    pub fn play(&mut self, action: ActionId) -> (Option<PlayerId>, bool) {
        let idx = self.target(action);
        let mover = self.current;
        self.cells[idx] = Cell::of_player(mover);
        self.current = 1 - mover;
        if self.completes_line(idx) {
            (Some(mover), true)
        } else {
            (None, self.cells.iter().all(|&c| c != Cell::Empty))
        }
    }

    pub fn render(&self) -> String {
        let cols = self.kind.cols();
        self.cells
            .chunks(cols)
            .map(|row| row.iter().map(|c| c.glyph()).collect::<String>())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub(super) struct GridGame {
    kind: GridKind,
}

impl GridGame {
    pub(super) fn construct(kind: GridKind, spec: &GameSpec) -> Result<GridGame, EngineError> {
        spec.check_keys(&[])?;
        Ok(GridGame { kind })
    }

    fn board(payload: &Payload) -> &GridBoard {
        match payload {
            Payload::Grid(b) => b,
            _ => unreachable!("grid game given foreign payload"),
        }
    }
}

impl Game for GridGame {
    fn name(&self) -> &str {
        match self.kind {
            GridKind::TicTacToe => "tic_tac_toe",
            GridKind::ConnectFour => "connect_four",
        }
    }

    fn title(&self) -> &str {
        match self.kind {
            GridKind::TicTacToe => "Tic-Tac-Toe",
            GridKind::ConnectFour => "Connect Four",
        }
    }

    fn metadata(&self) -> GameMetadata {
        GameMetadata {
            num_players: 2,
            simultaneous: false,
            max_turns: (self.kind.rows() * self.kind.cols()) as u32,
        }
    }

    fn initial(&self, _seed: u64) -> (Payload, Vec<PlayerId>) {
        (Payload::Grid(GridBoard::empty(self.kind)), vec![0])
    }

    fn legal(&self, payload: &Payload, _player: PlayerId) -> Vec<ActionId> {
        Self::board(payload).legal()
    }

    fn transition(&self, payload: &Payload, actions: &JointAction) -> Transition {
        let mut board = Self::board(payload).clone();
        let (_, &action) = actions.iter().next().expect("one action");
        let (winner, terminal) = board.play(action);
        let rewards: Rewards = match winner {
            Some(w) => [(w, 1.0), (1 - w, -1.0)].into_iter().collect(),
            None => [(0, 0.0), (1, 0.0)].into_iter().collect(),
        };
        let next = board.current;
        Transition {
            payload: Payload::Grid(board),
            rewards,
            terminal,
            to_move: vec![next],
        }
    }

    fn render(&self, payload: &Payload, _player: PlayerId) -> String {
        Self::board(payload).render()
    }

    fn action_label(&self, _payload: &Payload, _player: PlayerId, action: ActionId) -> String {
        let a = action.0 as usize;
        match self.kind {
            GridKind::TicTacToe => format!("place at row {}, column {}", a / 3, a % 3),
            GridKind::ConnectFour => format!("drop in column {a}"),
        }
    }

    fn view(&self, payload: &Payload, _player: PlayerId) -> serde_json::Value {
        let board = Self::board(payload);
        let rows: Vec<String> = board.render().lines().map(str::to_string).collect();
        json!({
            "kind": "grid",
            "rows": board.kind.rows(),
            "cols": board.kind.cols(),
            "cells": rows,
        })
    }

    fn zero_sum(&self) -> bool {
        true
    }
}
