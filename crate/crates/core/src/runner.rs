//! Seeded episode execution and batch orchestration.
//!
//! Episode `i` of a run (counting across games in config order) uses seed
//! `base_seed + i`. Every random stream inside an episode is derived from
//! that seed, so episodes are independent and a batch produces the same
//! records regardless of how many workers execute it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agents::{
    assign_policies, validate_policies, Agent, AgentDecision, AgentError, AgentKind, HumanProvider,
    PolicyAssignment,
};
use crate::backends::BackendPool;
use crate::engine::{
    default_registry, winner_of, ActionId, EngineError, GameSpec, GameState, JointAction, PlayerId,
    Rewards,
};
use crate::prompts::{build_observation, Observation, PromptError};
use crate::seed::{stream_rng, AGENT_STREAM_BASE, FALLBACK_STREAM};
use crate::tracestore::{StoreError, TraceStore};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IllegalPolicy {
    /// Substitute a uniformly random legal action and flag the move.
    #[default]
    RandomFallback,
    /// End the episode; the offender takes the worst payoff.
    Forfeit,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    pub games: Vec<GameSpec>,
    pub episodes_per_game: u32,
    pub base_seed: u64,
    pub policies: PolicyAssignment,
    /// Execution setting only: left out of the stored config and the
    /// content id, since it never changes what a run records.
    #[serde(default = "one", skip_serializing)]
    pub parallelism: usize,
    #[serde(default)]
    pub on_illegal: IllegalPolicy,
    pub output: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.games.is_empty() {
            return Err(RunError::Config("at least one game is required".into()));
        }
        if self.episodes_per_game == 0 {
            return Err(RunError::Config("episodes_per_game must be positive".into()));
        }
        if self.parallelism == 0 {
            return Err(RunError::Config("parallelism must be at least 1".into()));
        }
        for spec in &self.games {
            let game = default_registry().create(spec)?;
            validate_policies(&self.policies, &game.metadata())?;
        }
        Ok(())
    }

    /// Seed of episode `index` (counted across games).
    pub fn episode_seed(&self, index: u64) -> u64 {
        self.base_seed.wrapping_add(index)
    }

    /// `(spec, seed)` for every episode in execution order.
    pub fn episodes(&self) -> Vec<(GameSpec, u64)> {
        let per = self.episodes_per_game as u64;
        self.games
            .iter()
            .enumerate()
            .flat_map(|(g, spec)| (0..per).map(move |j| (spec.clone(), g as u64 * per + j)))
            .map(|(spec, i)| (spec, self.episode_seed(i)))
            .collect()
    }

    /// Stable identifier derived from the configuration content.
    pub fn content_id(&self) -> String {
        let mut c = self.clone();
        c.run_id = None;
        let digest = Sha256::digest(serde_json::to_vec(&c).expect("serialisable"));
        let hex: String = digest.iter().take(6).map(|b| format!("{b:02x}")).collect();
        format!("run-{hex}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Completed,
    Forfeited,
    Aborted,
}

impl EpisodeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EpisodeStatus::Completed => "completed",
            EpisodeStatus::Forfeited => "forfeited",
            EpisodeStatus::Aborted => "aborted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "completed" => Some(EpisodeStatus::Completed),
            "forfeited" => Some(EpisodeStatus::Forfeited),
            "aborted" => Some(EpisodeStatus::Aborted),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub episode_id: i64,
    pub run_id: String,
    pub game: String,
    pub seed: u64,
    pub rewards: Rewards,
    pub winner: Option<PlayerId>,
    /// Distinct turns with at least one move record.
    pub num_turns: u32,
    pub status: EpisodeStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MoveRecord {
    pub episode_id: i64,
    pub turn: u32,
    pub player: PlayerId,
    /// Applied action; for a forfeiting move the proposed integer, or -1
    /// when nothing could be extracted.
    pub action: i64,
    pub reasoning: String,
    pub prompt: String,
    pub raw_response: String,
    pub legal_actions: Vec<ActionId>,
    pub illegal: bool,
    pub fallback_used: bool,
    pub latency_ms: f64,
}

/// Receives episode progress as it happens.
pub trait EpisodeObserver {
    fn on_state(&mut self, _state: &GameState) {}
    fn on_move(&mut self, _record: &MoveRecord) {}
    fn on_finish(&mut self, _record: &EpisodeRecord, _state: &GameState) {}
}

pub struct NoObserver;
impl EpisodeObserver for NoObserver {}

#[derive(Debug, Clone)]
pub struct EpisodeRun {
    pub record: EpisodeRecord,
    pub moves: Vec<MoveRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Fallback(ActionId),
    Forfeit,
}

/// What to do with an unparseable or illegal proposal.
pub fn resolve_illegal(legal: &[ActionId], rng: &mut dyn RngCore, policy: IllegalPolicy) -> Resolution {
    match policy {
        IllegalPolicy::RandomFallback if !legal.is_empty() => {
            Resolution::Fallback(legal[rng.random_range(0..legal.len())])
        }
        _ => Resolution::Forfeit,
    }
}

/// Final rewards when `offenders` forfeit: the game's forfeit payoffs on
/// top of what has accumulated so far.
pub fn forfeit_rewards(state: &GameState, offenders: &BTreeSet<PlayerId>) -> Rewards {
    let (lo, hi) = state.game().forfeit_payoffs();
    state
        .returns()
        .iter()
        .map(|(&p, &r)| (p, r + if offenders.contains(&p) { lo } else { hi }))
        .collect()
}

fn gather_decisions(
    agents: &mut BTreeMap<PlayerId, Box<dyn Agent>>,
    rngs: &mut BTreeMap<PlayerId, ChaCha8Rng>,
    observations: &BTreeMap<PlayerId, Observation>,
) -> BTreeMap<PlayerId, Result<AgentDecision, AgentError>> {
    let mut seats: Vec<(PlayerId, &mut Box<dyn Agent>, &mut ChaCha8Rng, &Observation)> = agents
        .iter_mut()
        .zip(rngs.iter_mut())
        .filter_map(|((&p, agent), (_, rng))| observations.get(&p).map(|o| (p, agent, rng, o)))
        .collect();
    if seats.len() == 1 {
        let (p, agent, rng, obs) = seats.pop().expect("one seat");
        return BTreeMap::from([(p, agent.compute_action(obs, rng))]);
    }
    // Simultaneous moves: every seat decides before any action is applied.
    std::thread::scope(|scope| {
        let handles: Vec<_> = seats
            .into_iter()
            .map(|(p, agent, rng, obs)| (p, scope.spawn(move || agent.compute_action(obs, rng))))
            .collect();
        handles
            .into_iter()
            .map(|(p, h)| (p, h.join().expect("agent thread panicked")))
            .collect()
    })
}

/// Outcome of one seat's decision after the illegal-move policy.
#[derive(Debug)]
pub enum Settled {
    /// `action` is `None` when the seat forfeits.
    Move { record: MoveRecord, action: Option<ActionId> },
    Abort(AgentError),
}

/// Turns an agent's reply into a move record, applying `on_illegal` to
/// unusable replies. Backend failures count as unusable replies.
pub fn settle_decision(
    obs: &Observation,
    turn: u32,
    episode_id: i64,
    decision: Result<AgentDecision, AgentError>,
    fallback_rng: &mut dyn RngCore,
    on_illegal: IllegalPolicy,
) -> Settled {
    let decision = match decision {
        Ok(d) => d,
        Err(AgentError::Backend(e)) => {
            tracing::warn!(player = obs.player, error = %e, "backend failed; treating as illegal move");
            AgentDecision {
                action: None,
                proposed: None,
                reasoning: String::new(),
                raw_response: String::new(),
                latency_ms: 0.0,
            }
        }
        Err(e) => return Settled::Abort(e),
    };
    let mut record = MoveRecord {
        episode_id,
        turn,
        player: obs.player,
        action: -1,
        reasoning: decision.reasoning,
        prompt: obs.prompt.clone(),
        raw_response: decision.raw_response,
        legal_actions: obs.legal_actions.clone(),
        illegal: false,
        fallback_used: false,
        latency_ms: decision.latency_ms,
    };
    let action = match decision.action {
        Some(a) => Some(a),
        None => {
            record.illegal = true;
            match resolve_illegal(&obs.legal_actions, fallback_rng, on_illegal) {
                Resolution::Fallback(a) => {
                    record.fallback_used = true;
                    Some(a)
                }
                Resolution::Forfeit => {
                    record.action = decision.proposed.unwrap_or(-1);
                    None
                }
            }
        }
    };
    if let Some(a) = action {
        record.action = a.0 as i64;
    }
    Settled::Move { record, action }
}

fn distinct_turns(moves: &[MoveRecord]) -> u32 {
    moves.iter().map(|m| m.turn).collect::<BTreeSet<_>>().len() as u32
}

/// Plays one episode to the end (or until an agent aborts).
pub fn run_episode(
    spec: &GameSpec,
    agents: &mut BTreeMap<PlayerId, Box<dyn Agent>>,
    seed: u64,
    on_illegal: IllegalPolicy,
    run_id: &str,
    episode_id: i64,
    observer: &mut dyn EpisodeObserver,
) -> Result<EpisodeRun, RunError> {
    let mut state = default_registry().reset(spec, seed)?;
    validate_seats(agents, state.num_players())?;
    let mut rngs: BTreeMap<PlayerId, ChaCha8Rng> = agents
        .keys()
        .map(|&p| (p, stream_rng(seed, AGENT_STREAM_BASE + p as u64)))
        .collect();
    let mut fallback_rng = stream_rng(seed, FALLBACK_STREAM);
    let mut moves: Vec<MoveRecord> = Vec::new();
    observer.on_state(&state);

    let finish = |status: EpisodeStatus, rewards: Rewards, moves: Vec<MoveRecord>| {
        let record = EpisodeRecord {
            episode_id,
            run_id: run_id.to_string(),
            game: spec.name.clone(),
            seed,
            winner: if status == EpisodeStatus::Aborted {
                None
            } else {
                winner_of(&rewards)
            },
            rewards,
            num_turns: distinct_turns(&moves),
            status,
        };
        EpisodeRun { record, moves }
    };

    while !state.is_terminal() {
        let observations: BTreeMap<PlayerId, Observation> = state
            .to_move()
            .iter()
            .map(|&p| Ok((p, build_observation(&state, p)?)))
            .collect::<Result<_, PromptError>>()?;
        let decisions = gather_decisions(agents, &mut rngs, &observations);

        let mut joint = JointAction::new();
        let mut turn_moves = Vec::new();
        let mut offenders = BTreeSet::new();
        for (p, decision) in decisions {
            match settle_decision(&observations[&p], state.turn(), episode_id, decision, &mut fallback_rng, on_illegal) {
                Settled::Move { record, action } => {
                    match action {
                        Some(a) => {
                            joint.insert(p, a);
                        }
                        None => {
                            offenders.insert(p);
                        }
                    }
                    turn_moves.push(record);
                }
                Settled::Abort(e) => {
                    tracing::warn!(player = p, error = %e, "agent aborted episode");
                    let run = finish(EpisodeStatus::Aborted, state.returns().clone(), moves);
                    observer.on_finish(&run.record, &state);
                    return Ok(run);
                }
            }
        }
        for m in &turn_moves {
            observer.on_move(m);
        }
        moves.extend(turn_moves);

        if !offenders.is_empty() {
            let rewards = forfeit_rewards(&state, &offenders);
            let run = finish(EpisodeStatus::Forfeited, rewards, moves);
            observer.on_finish(&run.record, &state);
            return Ok(run);
        }
        state = state.apply(&joint)?.state;
        observer.on_state(&state);
    }
    let run = finish(EpisodeStatus::Completed, state.returns().clone(), moves);
    observer.on_finish(&run.record, &state);
    Ok(run)
}

fn validate_seats(agents: &BTreeMap<PlayerId, Box<dyn Agent>>, n: usize) -> Result<(), RunError> {
    if agents.keys().copied().eq(0..n) {
        Ok(())
    } else {
        Err(RunError::Config(format!("expected agents for seats 0..{n}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub run_id: String,
    pub store: PathBuf,
    pub episodes: usize,
    pub completed: usize,
    pub forfeited: usize,
    pub aborted: usize,
    pub illegal_moves: usize,
    pub fallback_moves: usize,
}

impl RunSummary {
    pub fn all_finished(&self) -> bool {
        self.aborted == 0
    }
}

/// Runs every episode of `config` on a pool of `config.parallelism`
/// workers and records them in the configured store, in episode order.
pub fn run_batch(config: &RunConfig, humans: &dyn HumanProvider) -> Result<RunSummary, RunError> {
    config.validate()?;
    let backends = BackendPool::new();
    // Surface backend problems (missing keys, bad URLs) before any episode.
    for d in config.policies.values().filter(|d| d.kind == AgentKind::Llm) {
        backends
            .get(d.backend.as_ref().expect("validated"))
            .map_err(AgentError::from)?;
    }
    let mut store = TraceStore::open(&config.output)?;
    let run_id = match &config.run_id {
        Some(id) => {
            if store.run_exists(id)? {
                return Err(RunError::Config(format!("run `{id}` already exists in the store")));
            }
            id.clone()
        }
        None => {
            let base = config.content_id();
            let mut id = base.clone();
            let mut n = 2;
            while store.run_exists(&id)? {
                id = format!("{base}-{n}");
                n += 1;
            }
            id
        }
    };
    let mut stored = config.clone();
    stored.run_id = Some(run_id.clone());
    store.insert_run(
        &run_id,
        &chrono::Utc::now().to_rfc3339(),
        &serde_json::to_string(&stored).expect("serialisable"),
    )?;
    let first_id = store.next_episode_id()?;
    let jobs = config.episodes();
    let workers = config.parallelism.min(jobs.len()).max(1);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<EpisodeRun, RunError>)>();

    let mut summary = RunSummary {
        run_id: run_id.clone(),
        store: config.output.clone(),
        episodes: jobs.len(),
        ..RunSummary::default()
    };

    std::thread::scope(|scope| -> Result<(), RunError> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, next, backends, run_id) = (&jobs, &next, &backends, &run_id);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((spec, seed)) = jobs.get(i) else { break };
                let result = (|| {
                    let meta = default_registry().create(spec)?.metadata();
                    let mut agents = assign_policies(&config.policies, &meta, backends, humans)?;
                    run_episode(
                        spec,
                        &mut agents,
                        *seed,
                        config.on_illegal,
                        run_id,
                        first_id + i as i64,
                        &mut NoObserver,
                    )
                })();
                if tx.send((i, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // Single writer; commits strictly in episode order.
        let mut pending: BTreeMap<usize, EpisodeRun> = BTreeMap::new();
        let mut written = 0;
        for (i, result) in rx {
            pending.insert(i, result?);
            while let Some(run) = pending.remove(&written) {
                store.write_episode(&run.record, &run.moves)?;
                match run.record.status {
                    EpisodeStatus::Completed => summary.completed += 1,
                    EpisodeStatus::Forfeited => summary.forfeited += 1,
                    EpisodeStatus::Aborted => summary.aborted += 1,
                }
                summary.illegal_moves += run.moves.iter().filter(|m| m.illegal).count();
                summary.fallback_moves += run.moves.iter().filter(|m| m.fallback_used).count();
                written += 1;
            }
        }
        Ok(())
    })?;
    Ok(summary)
}
