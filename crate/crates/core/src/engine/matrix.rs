//! One-shot and iterated two-player matrix games with simultaneous moves.

use serde_json::json;

use super::{
    ActionId, EngineError, Game, GameMetadata, GameSpec, JointAction, Payload, PlayerId, Rewards,
    Transition,
};

/// Prisoner's dilemma payoffs: mutual cooperation, sucker, temptation,
/// mutual defection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdPayoffs {
    pub reward: f64,
    pub sucker: f64,
    pub temptation: f64,
    pub punishment: f64,
}

impl Default for PdPayoffs {
    fn default() -> Self {
        Self {
            reward: 3.0,
            sucker: 0.0,
            temptation: 5.0,
            punishment: 1.0,
        }
    }
}

impl PdPayoffs {
    /// Defect strictly dominates cooperate for both players.
    pub fn defect_dominant(&self) -> bool {
        self.temptation > self.reward && self.punishment > self.sucker
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixKind {
    PrisonersDilemma(PdPayoffs),
    /// Player 0 is the matcher.
    MatchingPennies,
    RockPaperScissors,
}

impl MatrixKind {
    pub fn move_names(&self) -> &'static [&'static str] {
        match self {
            MatrixKind::PrisonersDilemma(_) => &["Cooperate", "Defect"],
            MatrixKind::MatchingPennies => &["Heads", "Tails"],
            MatrixKind::RockPaperScissors => &["Rock", "Paper", "Scissors"],
        }
    }

    pub fn payoff(&self, a0: ActionId, a1: ActionId) -> (f64, f64) {
        let (a, b) = (a0.0, a1.0);
        match self {
            MatrixKind::PrisonersDilemma(p) => match (a, b) {
                (0, 0) => (p.reward, p.reward),
                (0, _) => (p.sucker, p.temptation),
                (_, 0) => (p.temptation, p.sucker),
                _ => (p.punishment, p.punishment),
            },
            MatrixKind::MatchingPennies => {
                if a == b {
                    (1.0, -1.0)
                } else {
                    (-1.0, 1.0)
                }
            }
            MatrixKind::RockPaperScissors => match (3 + a - b) % 3 {
                0 => (0.0, 0.0),
                1 => (1.0, -1.0),
                _ => (-1.0, 1.0),
            },
        }
    }

    fn all_payoffs(&self) -> Vec<f64> {
        let n = self.move_names().len() as u32;
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                let (x, y) = self.payoff(ActionId(a), ActionId(b));
                out.extend([x, y]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRounds {
    pub kind: MatrixKind,
    pub rounds: u32,
    /// Joint actions of completed rounds, `[player 0, player 1]`.
    pub history: Vec<[ActionId; 2]>,
}

impl MatrixRounds {
    pub fn iterated(&self) -> bool {
        self.rounds > 1
    }

    pub fn finished(&self) -> bool {
        self.history.len() as u32 >= self.rounds
    }

    pub fn move_name(&self, action: ActionId) -> &'static str {
        self.kind.move_names()[action.0 as usize]
    }

    pub fn render(&self) -> String {
        let mut out = if self.finished() {
            format!("Finished after {} of {} rounds", self.history.len(), self.rounds)
        } else {
            format!("Round {} of {}", self.history.len() + 1, self.rounds)
        };
        if self.iterated() && !self.history.is_empty() {
            out.push_str("\nHistory:");
            for (i, [a, b]) in self.history.iter().enumerate() {
                out.push_str(&format!(
                    "\nRound {}: Player 0 played {}, Player 1 played {}",
                    i + 1,
                    self.move_name(*a),
                    self.move_name(*b)
                ));
            }
        }
        out
    }
}

pub(super) struct MatrixGame {
    name: &'static str,
    title: &'static str,
    kind: MatrixKind,
    rounds: u32,
}

fn number_param(spec: &GameSpec, key: &str, default: f64) -> Result<f64, EngineError> {
    match spec.params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| spec.config_error(format!("`{key}` must be a finite number"))),
    }
}

fn rounds_param(spec: &GameSpec) -> Result<u32, EngineError> {
    match spec.params.get("rounds") {
        None => Ok(1),
        Some(v) => match v.as_u64() {
            Some(n) if n >= 1 && n <= u32::MAX as u64 => Ok(n as u32),
            _ => Err(spec.config_error("`rounds` must be a positive integer")),
        },
    }
}

impl MatrixGame {
    pub(super) fn prisoners_dilemma(spec: &GameSpec) -> Result<MatrixGame, EngineError> {
        spec.check_keys(&["rounds", "reward", "sucker", "temptation", "punishment"])?;
        let d = PdPayoffs::default();
        let payoffs = PdPayoffs {
            reward: number_param(spec, "reward", d.reward)?,
            sucker: number_param(spec, "sucker", d.sucker)?,
            temptation: number_param(spec, "temptation", d.temptation)?,
            punishment: number_param(spec, "punishment", d.punishment)?,
        };
        Ok(MatrixGame {
            name: "matrix_pd",
            title: "Prisoner's Dilemma",
            kind: MatrixKind::PrisonersDilemma(payoffs),
            rounds: rounds_param(spec)?,
        })
    }

    pub(super) fn matching_pennies(spec: &GameSpec) -> Result<MatrixGame, EngineError> {
        spec.check_keys(&["rounds"])?;
        Ok(MatrixGame {
            name: "matching_pennies",
            title: "Matching Pennies",
            kind: MatrixKind::MatchingPennies,
            rounds: rounds_param(spec)?,
        })
    }

    pub(super) fn rock_paper_scissors(spec: &GameSpec) -> Result<MatrixGame, EngineError> {
        spec.check_keys(&["rounds"])?;
        Ok(MatrixGame {
            name: "rock_paper_scissors",
            title: "Rock-Paper-Scissors",
            kind: MatrixKind::RockPaperScissors,
            rounds: rounds_param(spec)?,
        })
    }

    fn state(payload: &Payload) -> &MatrixRounds {
        match payload {
            Payload::Matrix(m) => m,
            _ => unreachable!("matrix game given foreign payload"),
        }
    }
}

impl Game for MatrixGame {
    fn name(&self) -> &str {
        self.name
    }

    fn title(&self) -> &str {
        self.title
    }

    fn metadata(&self) -> GameMetadata {
        GameMetadata {
            num_players: 2,
            simultaneous: true,
            max_turns: self.rounds,
        }
    }

    fn initial(&self, _seed: u64) -> (Payload, Vec<PlayerId>) {
        let state = MatrixRounds {
            kind: self.kind,
            rounds: self.rounds,
            history: Vec::new(),
        };
        (Payload::Matrix(state), vec![0, 1])
    }

    fn legal(&self, _payload: &Payload, _player: PlayerId) -> Vec<ActionId> {
        (0..self.kind.move_names().len() as u32).map(ActionId).collect()
    }

    fn transition(&self, payload: &Payload, actions: &JointAction) -> Transition {
        let mut state = Self::state(payload).clone();
        let (a0, a1) = (actions[&0], actions[&1]);
        let (r0, r1) = self.kind.payoff(a0, a1);
        state.history.push([a0, a1]);
        let terminal = state.finished();
        Transition {
            payload: Payload::Matrix(state),
            rewards: Rewards::from([(0, r0), (1, r1)]),
            terminal,
            to_move: vec![0, 1],
        }
    }

    fn render(&self, payload: &Payload, _player: PlayerId) -> String {
        Self::state(payload).render()
    }

    fn action_label(&self, _payload: &Payload, _player: PlayerId, action: ActionId) -> String {
        self.kind.move_names()[action.0 as usize].to_string()
    }

    fn view(&self, payload: &Payload, _player: PlayerId) -> serde_json::Value {
        let state = Self::state(payload);
        let history: Vec<[&str; 2]> = state
            .history
            .iter()
            .map(|[a, b]| [state.move_name(*a), state.move_name(*b)])
            .collect();
        json!({
            "kind": "matrix",
            "round": (state.history.len() as u32 + 1).min(state.rounds),
            "rounds": state.rounds,
            "moves": self.kind.move_names(),
            "history": history,
        })
    }

    fn zero_sum(&self) -> bool {
        !matches!(self.kind, MatrixKind::PrisonersDilemma(_))
    }

    fn forfeit_payoffs(&self) -> (f64, f64) {
        let all = self.kind.all_payoffs();
        let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}
