use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use super::grid::{GridGame, GridKind};
use super::kuhn::KuhnGame;
use super::matrix::MatrixGame;
use super::{EngineError, Game, GameMetadata, GameSpec, GameState};

/// Builds a game from its spec, validating parameters.
pub type GameConstructor = fn(&GameSpec) -> Result<Arc<dyn Game>, EngineError>;

struct Entry {
    constructor: GameConstructor,
    metadata: GameMetadata,
}

/// Name → constructor table. Populated at startup and read-only afterwards.
#[derive(Default)]
pub struct GameRegistry {
    entries: BTreeMap<String, Entry>,
}

impl GameRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry holding the six built-in games.
    pub fn builtin() -> Self {
        let mut r = Self::new();
        let board = |n| GameMetadata {
            num_players: 2,
            simultaneous: false,
            max_turns: n,
        };
        let matrix = GameMetadata {
            num_players: 2,
            simultaneous: true,
            max_turns: 1,
        };
        let entries: [(&str, GameConstructor, GameMetadata); 6] = [
            (
                "tic_tac_toe",
                |s| Ok(Arc::new(GridGame::construct(GridKind::TicTacToe, s)?)),
                board(9),
            ),
            (
                "connect_four",
                |s| Ok(Arc::new(GridGame::construct(GridKind::ConnectFour, s)?)),
                board(42),
            ),
            ("kuhn_poker", |s| Ok(Arc::new(KuhnGame::construct(s)?)), board(3)),
            (
                "matrix_pd",
                |s| Ok(Arc::new(MatrixGame::prisoners_dilemma(s)?)),
                matrix,
            ),
            (
                "matching_pennies",
                |s| Ok(Arc::new(MatrixGame::matching_pennies(s)?)),
                matrix,
            ),
            (
                "rock_paper_scissors",
                |s| Ok(Arc::new(MatrixGame::rock_paper_scissors(s)?)),
                matrix,
            ),
        ];
        for (name, ctor, meta) in entries {
            r.register(name, ctor, meta).expect("builtin names are unique");
        }
        r
    }

    pub fn register(
        &mut self,
        name: &str,
        constructor: GameConstructor,
        metadata: GameMetadata,
    ) -> Result<(), EngineError> {
        if self.entries.contains_key(name) {
            return Err(EngineError::DuplicateGame(name.to_string()));
        }
        self.entries.insert(
            name.to_string(),
            Entry {
                constructor,
                metadata,
            },
        );
        Ok(())
    }

    pub fn create(&self, spec: &GameSpec) -> Result<Arc<dyn Game>, EngineError> {
        let entry = self
            .entries
            .get(&spec.name)
            .ok_or_else(|| EngineError::UnknownGame(spec.name.clone()))?;
        (entry.constructor)(spec)
    }

    pub fn reset(&self, spec: &GameSpec, seed: u64) -> Result<GameState, EngineError> {
        let game = self.create(spec)?;
        Ok(GameState::initial(game, spec.clone(), seed))
    }

    /// Metadata for default parameters.
    pub fn metadata(&self, name: &str) -> Option<GameMetadata> {
        self.entries.get(name).map(|e| e.metadata)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }
}

pub fn default_registry() -> &'static GameRegistry {
    static REGISTRY: OnceLock<GameRegistry> = OnceLock::new();
    REGISTRY.get_or_init(GameRegistry::builtin)
}
