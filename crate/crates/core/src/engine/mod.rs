//! Native game environments behind one interface covering turn-based and
//! simultaneous-move dynamics.
//!
//! A [`GameState`] is an immutable value: [`apply`] returns a fresh state and
//! never mutates its input. Chance events are resolved inside [`reset`] from
//! the seed, so `to_move` only ever lists real players.

mod grid;
mod kuhn;
mod matrix;
mod registry;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use grid::{Cell, GridBoard, GridKind};
pub use kuhn::{Card, KuhnHand, KuhnMove};
pub use matrix::{MatrixKind, MatrixRounds, PdPayoffs};
pub use registry::{default_registry, GameConstructor, GameRegistry};

pub type PlayerId = usize;

/// Per-player scalar rewards, keyed by player id.
pub type Rewards = BTreeMap<PlayerId, f64>;

/// One action per acting player.
pub type JointAction = BTreeMap<PlayerId, ActionId>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub u32);

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("unknown game `{0}`")]
    UnknownGame(String),
    #[error("game `{0}` is already registered")]
    DuplicateGame(String),
    #[error("invalid configuration for `{game}`: {reason}")]
    Config { game: String, reason: String },
    #[error("player {player} is not to move")]
    NotToMove { player: PlayerId },
    #[error("state is terminal")]
    Terminal,
    #[error("state is not terminal")]
    NotTerminal,
    #[error("illegal move: player {player} cannot play action {action}")]
    IllegalMove { player: PlayerId, action: ActionId },
    #[error("joint action must cover exactly {expected:?}, got {got:?}")]
    ActionCoverage {
        expected: Vec<PlayerId>,
        got: Vec<PlayerId>,
    },
}

/// Game name plus free-form parameters (e.g. `rounds` for iterated matrix games).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, serde_json::Value>,
}

impl GameSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub(crate) fn config_error(&self, reason: impl Into<String>) -> EngineError {
        EngineError::Config {
            game: self.name.clone(),
            reason: reason.into(),
        }
    }

    /// Rejects any parameter key outside `allowed`.
    pub(crate) fn check_keys(&self, allowed: &[&str]) -> Result<(), EngineError> {
        match self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(self.config_error(format!("unsupported parameter `{k}`"))),
            None => Ok(()),
        }
    }
}

// Accepts either `"tic_tac_toe"` or `{"name": ..., "params": {...}}`.
impl<'de> Deserialize<'de> for GameSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Full {
            name: String,
            #[serde(default)]
            params: BTreeMap<String, serde_json::Value>,
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Name(String),
            Full(Full),
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Name(name) => GameSpec::new(name),
            Repr::Full(f) => GameSpec {
                name: f.name,
                params: f.params,
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GameMetadata {
    pub num_players: usize,
    pub simultaneous: bool,
    pub max_turns: u32,
}

/// Game-specific part of a state.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Grid(GridBoard),
    Kuhn(KuhnHand),
    Matrix(MatrixRounds),
}

/// Result of a game's transition function.
#[derive(Debug, Clone)]
pub struct Transition {
    pub payload: Payload,
    pub rewards: Rewards,
    pub terminal: bool,
    pub to_move: Vec<PlayerId>,
}

/// Rules of one game. Implementations only see states they created and are
/// only called on behalf of players that are to move.
pub trait Game: Send + Sync {
    fn name(&self) -> &str;
    /// Human-readable title used in prompts ("Kuhn Poker").
    fn title(&self) -> &str;
    fn metadata(&self) -> GameMetadata;
    fn initial(&self, seed: u64) -> (Payload, Vec<PlayerId>);
    fn legal(&self, payload: &Payload, player: PlayerId) -> Vec<ActionId>;
    fn transition(&self, payload: &Payload, actions: &JointAction) -> Transition;
    fn render(&self, payload: &Payload, player: PlayerId) -> String;
    fn action_label(&self, payload: &Payload, player: PlayerId, action: ActionId) -> String;
    /// Structured per-player view for machine consumers. Must respect the
    /// same information hiding as `render`.
    fn view(&self, payload: &Payload, player: PlayerId) -> serde_json::Value;
    /// Whether every terminal reward vector sums to zero.
    fn zero_sum(&self) -> bool;
    /// `(offender, others)` rewards added when a player forfeits: -1/+1 by
    /// board convention, the extreme payoffs for matrix games.
    fn forfeit_payoffs(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }
}

#[derive(Clone)]
pub struct GameState {
    game: Arc<dyn Game>,
    spec: GameSpec,
    seed: u64,
    turn: u32,
    to_move: Vec<PlayerId>,
    terminal: bool,
    rewards: Rewards,
    returns: Rewards,
    payload: Payload,
}

impl PartialEq for GameState {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
            && self.seed == other.seed
            && self.turn == other.turn
            && self.to_move == other.to_move
            && self.terminal == other.terminal
            && self.rewards == other.rewards
            && self.returns == other.returns
            && self.payload == other.payload
    }
}

impl fmt::Debug for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GameState")
            .field("game", &self.spec.name)
            .field("turn", &self.turn)
            .field("to_move", &self.to_move)
            .field("terminal", &self.terminal)
            .field("returns", &self.returns)
            .field("payload", &self.payload)
            .finish()
    }
}

fn zero_rewards(n: usize) -> Rewards {
    (0..n).map(|p| (p, 0.0)).collect()
}

impl GameState {
    pub(crate) fn initial(game: Arc<dyn Game>, spec: GameSpec, seed: u64) -> Self {
        let (payload, to_move) = game.initial(seed);
        let n = game.metadata().num_players;
        Self {
            game,
            spec,
            seed,
            turn: 0,
            to_move,
            terminal: false,
            rewards: zero_rewards(n),
            returns: zero_rewards(n),
            payload,
        }
    }

    pub fn game(&self) -> &dyn Game {
        self.game.as_ref()
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn turn(&self) -> u32 {
        self.turn
    }

    pub fn to_move(&self) -> &[PlayerId] {
        &self.to_move
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    /// Rewards emitted by the most recent step.
    pub fn last_rewards(&self) -> &Rewards {
        &self.rewards
    }

    /// Cumulative rewards since reset.
    pub fn returns(&self) -> &Rewards {
        &self.returns
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn num_players(&self) -> usize {
        self.game.metadata().num_players
    }

    fn check_to_move(&self, player: PlayerId) -> Result<(), EngineError> {
        if self.terminal {
            return Err(EngineError::Terminal);
        }
        if !self.to_move.contains(&player) {
            return Err(EngineError::NotToMove { player });
        }
        Ok(())
    }

    pub fn legal_actions(&self, player: PlayerId) -> Result<Vec<ActionId>, EngineError> {
        self.check_to_move(player)?;
        Ok(self.game.legal(&self.payload, player))
    }

    pub fn apply(&self, actions: &JointAction) -> Result<Step, EngineError> {
        if self.terminal {
            return Err(EngineError::Terminal);
        }
        let got: Vec<PlayerId> = actions.keys().copied().collect();
        if got != self.to_move {
            return Err(EngineError::ActionCoverage {
                expected: self.to_move.clone(),
                got,
            });
        }
        for (&player, &action) in actions {
            if !self.game.legal(&self.payload, player).contains(&action) {
                return Err(EngineError::IllegalMove { player, action });
            }
        }
        let t = self.game.transition(&self.payload, actions);
        let mut returns = self.returns.clone();
        for (p, r) in &t.rewards {
            *returns.entry(*p).or_insert(0.0) += r;
        }
        let state = GameState {
            game: Arc::clone(&self.game),
            spec: self.spec.clone(),
            seed: self.seed,
            turn: self.turn + 1,
            to_move: if t.terminal { Vec::new() } else { t.to_move },
            terminal: t.terminal,
            rewards: t.rewards.clone(),
            returns,
            payload: t.payload,
        };
        Ok(Step {
            rewards: t.rewards,
            terminal: t.terminal,
            state,
        })
    }

    /// Convenience for turn-based games.
    pub fn apply_single(&self, player: PlayerId, action: ActionId) -> Result<Step, EngineError> {
        self.apply(&JointAction::from([(player, action)]))
    }

    pub fn state_string(&self, player: PlayerId) -> String {
        self.game.render(&self.payload, player)
    }

    pub fn action_label(&self, player: PlayerId, action: ActionId) -> String {
        self.game.action_label(&self.payload, player, action)
    }

    pub fn view(&self, player: PlayerId) -> serde_json::Value {
        self.game.view(&self.payload, player)
    }

    /// The unique player with strictly maximal cumulative reward.
    pub fn winner(&self) -> Result<Option<PlayerId>, EngineError> {
        if !self.terminal {
            return Err(EngineError::NotTerminal);
        }
        Ok(winner_of(&self.returns))
    }
}

/// Unique arg-max of a reward map, `None` on ties.
pub fn winner_of(rewards: &Rewards) -> Option<PlayerId> {
    let best = rewards.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut top = rewards.iter().filter(|(_, &r)| r == best);
    match (top.next(), top.next()) {
        (Some((&p, _)), None) => Some(p),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct Step {
    pub state: GameState,
    pub rewards: Rewards,
    pub terminal: bool,
}

/// Resets `spec` on the default registry.
pub fn reset(spec: &GameSpec, seed: u64) -> Result<GameState, EngineError> {
    default_registry().reset(spec, seed)
}
