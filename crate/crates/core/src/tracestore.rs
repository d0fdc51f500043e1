//! SQLite persistence for runs, episodes and moves.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rusqlite::{params, Connection, OptionalExtension, Transaction};
use serde::Serialize;
use thiserror::Error;

use crate::agents::AgentDescriptor;
use crate::engine::{ActionId, PlayerId, Rewards};
use crate::runner::{EpisodeRecord, EpisodeStatus, MoveRecord};

pub const SCHEMA_VERSION: i64 = 1;

const SCHEMA: &str = "
CREATE TABLE IF NOT EXISTS runs (
    run_id TEXT PRIMARY KEY,
    created_at TEXT,
    config TEXT
);
CREATE TABLE IF NOT EXISTS episodes (
    episode_id INTEGER PRIMARY KEY,
    run_id TEXT NOT NULL REFERENCES runs(run_id),
    game TEXT NOT NULL,
    seed INTEGER NOT NULL,
    status TEXT NOT NULL,
    rewards TEXT NOT NULL,
    winner INTEGER,
    num_turns INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS moves (
    move_id INTEGER PRIMARY KEY,
    episode_id INTEGER NOT NULL REFERENCES episodes(episode_id),
    turn INTEGER NOT NULL,
    player INTEGER NOT NULL,
    action INTEGER NOT NULL,
    reasoning TEXT NOT NULL,
    prompt TEXT NOT NULL,
    raw_response TEXT NOT NULL,
    legal_actions TEXT NOT NULL,
    illegal INTEGER NOT NULL,
    fallback_used INTEGER NOT NULL,
    latency_ms REAL NOT NULL
);
CREATE INDEX IF NOT EXISTS moves_by_episode ON moves(episode_id, turn, player);
CREATE INDEX IF NOT EXISTS episodes_by_run ON episodes(run_id);
";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot open trace store {path}: {source}")]
    Open {
        path: PathBuf,
        source: rusqlite::Error,
    },
    #[error("trace store {path} has schema version {found}, expected {SCHEMA_VERSION}")]
    Version { path: PathBuf, found: i64 },
    #[error("trace store write failed: {0}")]
    Write(rusqlite::Error),
    #[error("trace store read failed: {0}")]
    Read(rusqlite::Error),
    #[error("corrupt row: {0}")]
    Corrupt(String),
    #[error("unknown run `{0}`")]
    UnknownRun(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MoveFilter {
    pub run_id: Option<String>,
    pub game: Option<String>,
    /// Agent label such as `random` or `llm:<model>`.
    pub agent: Option<String>,
    pub player: Option<PlayerId>,
}

impl MoveFilter {
    pub fn run(run_id: impl Into<String>) -> Self {
        Self {
            run_id: Some(run_id.into()),
            ..Self::default()
        }
    }
}

/// A move joined with its episode context.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoveRow {
    pub run_id: String,
    pub game: String,
    pub agent: String,
    #[serde(flatten)]
    pub record: MoveRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub run_id: String,
    pub created_at: Option<String>,
    pub config: Option<String>,
}

pub struct TraceStore {
    conn: Connection,
    path: PathBuf,
}

impl std::fmt::Debug for TraceStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceStore").field("path", &self.path).finish()
    }
}

impl TraceStore {
    /// Opens (creating if needed) the store at `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let err = |source| StoreError::Open {
            path: path.clone(),
            source,
        };
        let conn = Connection::open(&path).map_err(err)?;
        conn.busy_timeout(Duration::from_secs(10)).map_err(err)?;
        conn.pragma_update(None, "foreign_keys", true).map_err(err)?;
        let found: i64 = conn
            .pragma_query_value(None, "user_version", |r| r.get(0))
            .map_err(err)?;
        match found {
            0 => {
                conn.execute_batch(SCHEMA).map_err(err)?;
                conn.pragma_update(None, "user_version", SCHEMA_VERSION).map_err(err)?;
            }
            SCHEMA_VERSION => {}
            found => return Err(StoreError::Version { path, found }),
        }
        Ok(Self { conn, path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn schema_version(&self) -> Result<i64, StoreError> {
        self.conn
            .pragma_query_value(None, "user_version", |r| r.get(0))
            .map_err(StoreError::Read)
    }

    pub fn insert_run(&mut self, run_id: &str, created_at: &str, config: &str) -> Result<(), StoreError> {
        self.conn
            .execute(
                "INSERT INTO runs (run_id, created_at, config) VALUES (?1, ?2, ?3)",
                params![run_id, created_at, config],
            )
            .map_err(StoreError::Write)?;
        Ok(())
    }

    pub fn run_exists(&self, run_id: &str) -> Result<bool, StoreError> {
        Ok(self.run(run_id)?.is_some())
    }

    pub fn run(&self, run_id: &str) -> Result<Option<RunRow>, StoreError> {
        self.conn
            .query_row(
                "SELECT run_id, created_at, config FROM runs WHERE run_id = ?1",
                [run_id],
                |r| {
                    Ok(RunRow {
                        run_id: r.get(0)?,
                        created_at: r.get(1)?,
                        config: r.get(2)?,
                    })
                },
            )
            .optional()
            .map_err(StoreError::Read)
    }

    pub fn runs(&self) -> Result<Vec<RunRow>, StoreError> {
        let mut stmt = self
            .conn
            .prepare("SELECT run_id, created_at, config FROM runs ORDER BY run_id")
            .map_err(StoreError::Read)?;
        let rows = stmt
            .query_map([], |r| {
                Ok(RunRow {
                    run_id: r.get(0)?,
                    created_at: r.get(1)?,
                    config: r.get(2)?,
                })
            })
            .map_err(StoreError::Read)?;
        rows.collect::<Result<_, _>>().map_err(StoreError::Read)
    }

    /// Smallest episode id greater than every stored one.
    pub fn next_episode_id(&self) -> Result<i64, StoreError> {
        self.conn
            .query_row("SELECT COALESCE(MAX(episode_id), 0) + 1 FROM episodes", [], |r| r.get(0))
            .map_err(StoreError::Read)
    }

    /// Writes an episode and its moves in one transaction.
    pub fn write_episode(&mut self, episode: &EpisodeRecord, moves: &[MoveRecord]) -> Result<(), StoreError> {
        self.write_episode_inner(episode, moves, None)
    }

    fn write_episode_inner(
        &mut self,
        episode: &EpisodeRecord,
        moves: &[MoveRecord],
        fail_after: Option<usize>,
    ) -> Result<(), StoreError> {
        if let Some(m) = moves.iter().find(|m| m.episode_id != episode.episode_id) {
            return Err(StoreError::Corrupt(format!(
                "move for episode {} written with episode {}",
                m.episode_id, episode.episode_id
            )));
        }
        let tx = self.conn.transaction().map_err(StoreError::Write)?;
        insert_rows(&tx, episode, moves, fail_after).map_err(StoreError::Write)?;
        tx.commit().map_err(StoreError::Write)
    }

    pub fn episodes(&self, run_id: Option<&str>) -> Result<Vec<EpisodeRecord>, StoreError> {
        let mut stmt = self
            .conn
            .prepare(
                "SELECT episode_id, run_id, game, seed, status, rewards, winner, num_turns
                 FROM episodes WHERE (?1 IS NULL OR run_id = ?1) ORDER BY episode_id",
            )
            .map_err(StoreError::Read)?;
        let raw = stmt
            .query_map([run_id], |r| {
                Ok((
                    r.get::<_, i64>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, String>(2)?,
                    r.get::<_, i64>(3)?,
                    r.get::<_, String>(4)?,
                    r.get::<_, String>(5)?,
                    r.get::<_, Option<i64>>(6)?,
                    r.get::<_, i64>(7)?,
                ))
            })
            .map_err(StoreError::Read)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(StoreError::Read)?;
        raw.into_iter()
            .map(|(episode_id, run_id, game, seed, status, rewards, winner, num_turns)| {
                Ok(EpisodeRecord {
                    episode_id,
                    run_id,
                    game,
                    seed: seed as u64,
                    status: EpisodeStatus::parse(&status)
                        .ok_or_else(|| StoreError::Corrupt(format!("status `{status}`")))?,
                    rewards: parse_rewards(&rewards)?,
                    winner: winner.map(|w| w as PlayerId),
                    num_turns: num_turns as u32,
                })
            })
            .collect()
    }

    /// Agent label per seat for every run, from the stored configuration.
    pub fn agent_labels(&self) -> Result<BTreeMap<String, BTreeMap<PlayerId, String>>, StoreError> {
        Ok(self
            .runs()?
            .into_iter()
            .map(|run| {
                let labels = run.config.as_deref().map(seat_labels).unwrap_or_default();
                (run.run_id, labels)
            })
            .collect())
    }

    /// Moves matching every set field of `filter`, ordered by
    /// `(episode_id, turn, player)`.
    pub fn query_moves(&self, filter: &MoveFilter) -> Result<Vec<MoveRow>, StoreError> {
        let labels = self.agent_labels()?;
        let mut stmt = self
            .conn
            .prepare(
                "SELECT e.run_id, e.game, m.episode_id, m.turn, m.player, m.action, m.reasoning,
                        m.prompt, m.raw_response, m.legal_actions, m.illegal, m.fallback_used,
                        m.latency_ms
                 FROM moves m JOIN episodes e ON e.episode_id = m.episode_id
                 WHERE (?1 IS NULL OR e.run_id = ?1)
                   AND (?2 IS NULL OR e.game = ?2)
                   AND (?3 IS NULL OR m.player = ?3)
                 ORDER BY m.episode_id, m.turn, m.player, m.move_id",
            )
            .map_err(StoreError::Read)?;
        let player = filter.player.map(|p| p as i64);
        let raw = stmt
            .query_map(params![filter.run_id, filter.game, player], |r| {
                Ok((
                    r.get::<_, String>(0)?,
                    r.get::<_, String>(1)?,
                    r.get::<_, i64>(2)?,
                    r.get::<_, i64>(3)?,
                    r.get::<_, i64>(4)?,
                    r.get::<_, i64>(5)?,
                    r.get::<_, String>(6)?,
                    r.get::<_, String>(7)?,
                    r.get::<_, String>(8)?,
                    r.get::<_, String>(9)?,
                    r.get::<_, bool>(10)?,
                    r.get::<_, bool>(11)?,
                    r.get::<_, f64>(12)?,
                ))
            })
            .map_err(StoreError::Read)?
            .collect::<Result<Vec<_>, _>>()
            .map_err(StoreError::Read)?;
        let mut out = Vec::with_capacity(raw.len());
        for (run_id, game, episode_id, turn, player, action, reasoning, prompt, raw_response, legal, illegal, fallback, latency) in raw {
            let player = player as PlayerId;
            let agent = labels
                .get(&run_id)
                .and_then(|l| l.get(&player))
                .cloned()
                .unwrap_or_else(|| "unknown".into());
            if filter.agent.as_deref().is_some_and(|a| a != agent) {
                continue;
            }
            let legal_actions: Vec<ActionId> =
                serde_json::from_str(&legal).map_err(|e| StoreError::Corrupt(format!("legal_actions: {e}")))?;
            out.push(MoveRow {
                run_id,
                game,
                agent,
                record: MoveRecord {
                    episode_id,
                    turn: turn as u32,
                    player,
                    action,
                    reasoning,
                    prompt,
                    raw_response,
                    legal_actions,
                    illegal,
                    fallback_used: fallback,
                    latency_ms: latency,
                },
            });
        }
        Ok(out)
    }

    /// Counts of rows whose foreign references are dangling; both zero in a
    /// healthy store.
    pub fn orphan_counts(&self) -> Result<(i64, i64), StoreError> {
        let moves = self
            .conn
            .query_row(
                "SELECT COUNT(*) FROM moves WHERE episode_id NOT IN (SELECT episode_id FROM episodes)",
                [],
                |r| r.get(0),
            )
            .map_err(StoreError::Read)?;
        let episodes = self
            .conn
            .query_row(
                "SELECT COUNT(*) FROM episodes WHERE run_id NOT IN (SELECT run_id FROM runs)",
                [],
                |r| r.get(0),
            )
            .map_err(StoreError::Read)?;
        Ok((moves, episodes))
    }
}

fn insert_rows(
    tx: &Transaction<'_>,
    e: &EpisodeRecord,
    moves: &[MoveRecord],
    fail_after: Option<usize>,
) -> rusqlite::Result<()> {
    tx.execute(
        "INSERT INTO episodes (episode_id, run_id, game, seed, status, rewards, winner, num_turns)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)",
        params![
            e.episode_id,
            e.run_id,
            e.game,
            e.seed as i64,
            e.status.as_str(),
            rewards_json(&e.rewards),
            e.winner.map(|w| w as i64),
            e.num_turns as i64,
        ],
    )?;
    let mut stmt = tx.prepare_cached(
        "INSERT INTO moves (episode_id, turn, player, action, reasoning, prompt, raw_response,
                            legal_actions, illegal, fallback_used, latency_ms)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11)",
    )?;
    for (i, m) in moves.iter().enumerate() {
        if fail_after == Some(i) {
            return Err(rusqlite::Error::ExecuteReturnedResults);
        }
        stmt.execute(params![
            m.episode_id,
            m.turn as i64,
            m.player as i64,
            m.action,
            m.reasoning,
            m.prompt,
            m.raw_response,
            serde_json::to_string(&m.legal_actions).expect("serialisable"),
            m.illegal,
            m.fallback_used,
            m.latency_ms,
        ])?;
    }
    Ok(())
}

/// Canonical text for a reward map: keys in ascending seat order.
pub fn rewards_json(rewards: &Rewards) -> String {
    serde_json::to_string(rewards).expect("serialisable")
}

fn parse_rewards(text: &str) -> Result<Rewards, StoreError> {
    let raw: BTreeMap<String, f64> =
        serde_json::from_str(text).map_err(|e| StoreError::Corrupt(format!("rewards: {e}")))?;
    raw.into_iter()
        .map(|(k, v)| {
            k.parse::<PlayerId>()
                .map(|p| (p, v))
                .map_err(|_| StoreError::Corrupt(format!("rewards key `{k}`")))
        })
        .collect()
}

fn seat_labels(config: &str) -> BTreeMap<PlayerId, String> {
    let Ok(value) = serde_json::from_str::<serde_json::Value>(config) else {
        return BTreeMap::new();
    };
    let Some(policies) = value.get("policies").and_then(|p| p.as_object()) else {
        return BTreeMap::new();
    };
    policies
        .iter()
        .filter_map(|(seat, d)| {
            let seat = seat.parse().ok()?;
            let d: AgentDescriptor = serde_json::from_value(d.clone()).ok()?;
            Some((seat, d.label()))
        })
        .collect()
}
