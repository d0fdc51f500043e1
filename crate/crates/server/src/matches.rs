//! Live matches between one human seat and one agent seat.

use std::collections::BTreeMap;
use std::time::Instant;

use arena_core::agents::{build_agent, Agent, AgentDescriptor, AgentKind, PolicyAssignment};
use arena_core::backends::BackendPool;
use arena_core::engine::{
    default_registry, winner_of, ActionId, EngineError, GameSpec, GameState, JointAction, PlayerId, Rewards,
};
use arena_core::prompts::{action_labels, build_observation, ActionLabel, Observation};
use arena_core::runner::{
    settle_decision, EpisodeRecord, EpisodeStatus, IllegalPolicy, MoveRecord, RunConfig, Settled,
};
use arena_core::seed::{stream_rng, AGENT_STREAM_BASE, FALLBACK_STREAM};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::broadcast;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{message}")]
    Conflict {
        message: String,
        legal_actions: Vec<ActionId>,
    },
    #[error("unknown match `{0}`")]
    NotFound(String),
}

impl From<EngineError> for MatchError {
    fn from(e: EngineError) -> Self {
        MatchError::BadRequest(e.to_string())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateMatch {
    pub game: GameSpec,
    pub human_player: PlayerId,
    pub opponent: AgentDescriptor,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitMove {
    pub player: PlayerId,
    pub action: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    StateUpdate {
        seq: usize,
        turn: u32,
        to_move: Vec<PlayerId>,
        /// The human's legal actions; empty when the human is not to move.
        legal_actions: Vec<ActionId>,
        state_string: String,
        view: serde_json::Value,
    },
    AgentMove {
        seq: usize,
        turn: u32,
        player: PlayerId,
        action: ActionId,
        label: String,
        reasoning: String,
        illegal: bool,
        fallback_used: bool,
    },
    Terminal {
        seq: usize,
        rewards: Rewards,
        winner: Option<PlayerId>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchStatus {
    /// Waiting for the human seat.
    Waiting,
    /// An agent is deciding.
    Active,
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub match_id: String,
    pub game: GameSpec,
    pub seed: u64,
    pub human_player: PlayerId,
    pub opponent: String,
    pub status: MatchStatus,
    pub turn: u32,
    pub to_move: Vec<PlayerId>,
    pub legal_actions: Vec<ActionId>,
    pub action_labels: Vec<ActionLabel>,
    pub state_string: String,
    pub view: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rewards: Option<Rewards>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub winner: Option<PlayerId>,
    pub events: Vec<Event>,
}

pub struct Match {
    id: String,
    spec: GameSpec,
    seed: u64,
    human: PlayerId,
    seat: PlayerId,
    opponent: AgentDescriptor,
    state: GameState,
    agent: Box<dyn Agent>,
    agent_rng: ChaCha8Rng,
    fallback_rng: ChaCha8Rng,
    events: Vec<Event>,
    moves: Vec<MoveRecord>,
    human_since: Instant,
    tx: broadcast::Sender<Event>,
    persisted: bool,
}

impl Match {
    pub fn create(id: String, req: CreateMatch, backends: &BackendPool) -> Result<Self, MatchError> {
        let game = default_registry().create(&req.game)?;
        let meta = game.metadata();
        if meta.num_players != 2 {
            return Err(MatchError::BadRequest("live matches need a two-player game".into()));
        }
        if req.human_player > 1 {
            return Err(MatchError::BadRequest("human_player must be 0 or 1".into()));
        }
        if req.opponent.kind == AgentKind::Human {
            return Err(MatchError::BadRequest("opponent must be an agent".into()));
        }
        let agent = build_agent(&req.opponent, backends).map_err(|e| MatchError::BadRequest(e.to_string()))?;
        let seed = req.seed.unwrap_or_else(rand::random);
        let seat = 1 - req.human_player;
        let state = default_registry().reset(&req.game, seed)?;
        let (tx, _) = broadcast::channel(256);
        let mut m = Match {
            id,
            spec: req.game,
            seed,
            human: req.human_player,
            seat,
            opponent: req.opponent,
            state,
            agent,
            agent_rng: stream_rng(seed, AGENT_STREAM_BASE + seat as u64),
            fallback_rng: stream_rng(seed, FALLBACK_STREAM),
            events: Vec::new(),
            moves: Vec::new(),
            human_since: Instant::now(),
            tx,
            persisted: false,
        };
        m.push_state();
        m.advance();
        Ok(m)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn is_terminal(&self) -> bool {
        self.state.is_terminal()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn subscribe(&self) -> (Vec<Event>, broadcast::Receiver<Event>) {
        (self.events.clone(), self.tx.subscribe())
    }

    fn push(&mut self, mut event: Event) {
        let seq = self.events.len();
        match &mut event {
            Event::StateUpdate { seq: s, .. } | Event::AgentMove { seq: s, .. } | Event::Terminal { seq: s, .. } => {
                *s = seq
            }
        }
        self.events.push(event.clone());
        let _ = self.tx.send(event);
    }

    fn human_legal(&self) -> Vec<ActionId> {
        if self.state.to_move().contains(&self.human) {
            self.state.legal_actions(self.human).unwrap_or_default()
        } else {
            Vec::new()
        }
    }

    fn push_state(&mut self) {
        self.human_since = Instant::now();
        let event = Event::StateUpdate {
            seq: 0,
            turn: self.state.turn(),
            to_move: self.state.to_move().to_vec(),
            legal_actions: self.human_legal(),
            state_string: self.state.state_string(self.human),
            view: self.state.view(self.human),
        };
        self.push(event);
        if self.state.is_terminal() {
            let rewards = self.state.returns().clone();
            let winner = winner_of(&rewards);
            self.push(Event::Terminal { seq: 0, rewards, winner });
        }
    }

    /// Lets the agent decide at the current state and records the move.
    fn agent_decides(&mut self) -> ActionId {
        let obs: Observation = build_observation(&self.state, self.seat).expect("agent seat is to move");
        let decision = self.agent.compute_action(&obs, &mut self.agent_rng);
        let settled = settle_decision(
            &obs,
            self.state.turn(),
            0,
            decision,
            &mut self.fallback_rng,
            IllegalPolicy::RandomFallback,
        );
        let Settled::Move { record, action: Some(action) } = settled else {
            unreachable!("non-human agents with random fallback always yield an action")
        };
        self.push(Event::AgentMove {
            seq: 0,
            turn: record.turn,
            player: self.seat,
            action,
            label: self.state.action_label(self.seat, action),
            reasoning: record.reasoning.clone(),
            illegal: record.illegal,
            fallback_used: record.fallback_used,
        });
        self.moves.push(record);
        action
    }

    fn apply(&mut self, joint: &JointAction) {
        self.state = self.state.apply(joint).expect("validated joint action").state;
        self.push_state();
    }

    /// Plays agent turns until the human must act or the game ends.
    fn advance(&mut self) {
        while !self.state.is_terminal() && !self.state.to_move().contains(&self.human) {
            let action = self.agent_decides();
            self.apply(&JointAction::from([(self.seat, action)]));
        }
    }

    pub fn submit(&mut self, req: &SubmitMove) -> Result<(), MatchError> {
        let conflict = |message: String, legal_actions| MatchError::Conflict { message, legal_actions };
        if self.state.is_terminal() {
            return Err(conflict("match is over".into(), Vec::new()));
        }
        if req.player != self.human {
            return Err(conflict(format!("seat {} is not the human seat", req.player), self.human_legal()));
        }
        let legal = self.human_legal();
        if legal.is_empty() {
            return Err(conflict("not your turn".into(), legal));
        }
        let action = match u32::try_from(req.action).map(ActionId) {
            Ok(a) if legal.contains(&a) => a,
            _ => return Err(conflict(format!("action {} is not legal", req.action), legal)),
        };
        let obs = build_observation(&self.state, self.human).expect("human seat is to move");
        let mut joint = JointAction::from([(self.human, action)]);
        if self.state.to_move().contains(&self.seat) {
            joint.insert(self.seat, self.agent_decides());
        }
        self.moves.push(MoveRecord {
            episode_id: 0,
            turn: self.state.turn(),
            player: self.human,
            action: action.0 as i64,
            reasoning: String::new(),
            prompt: obs.prompt,
            raw_response: String::new(),
            legal_actions: obs.legal_actions,
            illegal: false,
            fallback_used: false,
            latency_ms: self.human_since.elapsed().as_secs_f64() * 1e3,
        });
        self.apply(&joint);
        self.advance();
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        let terminal = self.state.is_terminal();
        let legal_actions = self.human_legal();
        Snapshot {
            match_id: self.id.clone(),
            game: self.spec.clone(),
            seed: self.seed,
            human_player: self.human,
            opponent: self.opponent.label(),
            status: if terminal {
                MatchStatus::Terminal
            } else if legal_actions.is_empty() {
                MatchStatus::Active
            } else {
                MatchStatus::Waiting
            },
            turn: self.state.turn(),
            to_move: self.state.to_move().to_vec(),
            action_labels: if legal_actions.is_empty() {
                Vec::new()
            } else {
                action_labels(&self.state, self.human).unwrap_or_default()
            },
            legal_actions,
            state_string: self.state.state_string(self.human),
            view: self.state.view(self.human),
            rewards: terminal.then(|| self.state.returns().clone()),
            winner: if terminal { winner_of(self.state.returns()) } else { None },
            events: self.events.clone(),
        }
    }

    /// Trace-store rows for a finished match, once.
    pub fn take_trace(&mut self, episode_id: i64) -> Option<(RunConfig, EpisodeRecord, Vec<MoveRecord>)> {
        if !self.state.is_terminal() || self.persisted {
            return None;
        }
        self.persisted = true;
        let policies: PolicyAssignment =
            BTreeMap::from([(self.human, AgentDescriptor::human()), (self.seat, self.opponent.clone())]);
        let config = RunConfig {
            run_id: Some(self.run_id()),
            games: vec![self.spec.clone()],
            episodes_per_game: 1,
            base_seed: self.seed,
            policies,
            parallelism: 1,
            on_illegal: IllegalPolicy::RandomFallback,
            output: Default::default(),
        };
        let mut moves = self.moves.clone();
        moves.sort_by_key(|m| (m.turn, m.player));
        for m in &mut moves {
            m.episode_id = episode_id;
        }
        let rewards = self.state.returns().clone();
        let episode = EpisodeRecord {
            episode_id,
            run_id: self.run_id(),
            game: self.spec.name.clone(),
            seed: self.seed,
            winner: winner_of(&rewards),
            rewards,
            num_turns: moves.iter().map(|m| m.turn).collect::<std::collections::BTreeSet<_>>().len() as u32,
            status: EpisodeStatus::Completed,
        };
        Some((config, episode, moves))
    }

    pub fn run_id(&self) -> String {
        format!("match-{}", self.id)
    }
}
