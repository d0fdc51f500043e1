//! Random, human and language-model policies behind one decision interface.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{parse_decision, Backend, BackendError, BackendPool, BackendRef, GenerationParams};
use crate::engine::{ActionId, GameMetadata, PlayerId};
use crate::prompts::Observation;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("agent configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("agent aborted: {0}")]
    Aborted(String),
    #[error("observation has no legal actions")]
    NoLegalActions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentDecision {
    /// Some exactly when the output parsed to a legal action.
    pub action: Option<ActionId>,
    /// Integer the agent proposed, legal or not.
    pub proposed: Option<i64>,
    pub reasoning: String,
    pub raw_response: String,
    pub latency_ms: f64,
}

impl AgentDecision {
    pub fn parse_ok(&self) -> bool {
        self.action.is_some()
    }
}

pub trait Agent: Send {
    fn compute_action(
        &mut self,
        observation: &Observation,
        rng: &mut dyn RngCore,
    ) -> Result<AgentDecision, AgentError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Random,
    Human,
    Llm,
}

fn default_max_tokens() -> u32 {
    512
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDescriptor {
    pub kind: AgentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendRef>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

impl AgentDescriptor {
    pub fn random() -> Self {
        Self::of_kind(AgentKind::Random)
    }

    pub fn human() -> Self {
        Self::of_kind(AgentKind::Human)
    }

    pub fn llm(model: impl Into<String>, backend: BackendRef) -> Self {
        Self {
            model: Some(model.into()),
            backend: Some(backend),
            ..Self::of_kind(AgentKind::Llm)
        }
    }

    fn of_kind(kind: AgentKind) -> Self {
        Self {
            kind,
            model: None,
            backend: None,
            temperature: 0.0,
            max_tokens: default_max_tokens(),
        }
    }

    /// Name used to group this agent's moves in analysis.
    pub fn label(&self) -> String {
        match self.kind {
            AgentKind::Random => "random".into(),
            AgentKind::Human => "human".into(),
            AgentKind::Llm => format!("llm:{}", self.model.as_deref().unwrap_or("?")),
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.kind == AgentKind::Llm {
            if self.model.as_deref().is_none_or(str::is_empty) {
                return Err(AgentError::Config("llm agent requires a model".into()));
            }
            match &self.backend {
                None => return Err(AgentError::Config("llm agent requires a backend".into())),
                Some(b) => b.validate().map_err(|e| AgentError::Config(e.to_string()))?,
            }
        }
        if self.max_tokens == 0 {
            return Err(AgentError::Config("max_tokens must be positive".into()));
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(AgentError::Config("temperature must be a non-negative number".into()));
        }
        Ok(())
    }
}

/// One agent descriptor per seat.
pub type PolicyAssignment = BTreeMap<PlayerId, AgentDescriptor>;

pub struct RandomAgent;

impl Agent for RandomAgent {
    fn compute_action(
        &mut self,
        observation: &Observation,
        rng: &mut dyn RngCore,
    ) -> Result<AgentDecision, AgentError> {
        let legal = &observation.legal_actions;
        if legal.is_empty() {
            return Err(AgentError::NoLegalActions);
        }
        let action = legal[rng.random_range(0..legal.len())];
        Ok(AgentDecision {
            action: Some(action),
            proposed: Some(action.0 as i64),
            reasoning: String::new(),
            raw_response: String::new(),
            latency_ms: 0.0,
        })
    }
}

pub struct LlmAgent {
    backend: Arc<dyn Backend>,
    params: GenerationParams,
}

impl LlmAgent {
    pub fn new(backend: Arc<dyn Backend>, params: GenerationParams) -> Self {
        Self { backend, params }
    }
}

impl Agent for LlmAgent {
    fn compute_action(
        &mut self,
        observation: &Observation,
        _rng: &mut dyn RngCore,
    ) -> Result<AgentDecision, AgentError> {
        if observation.legal_actions.is_empty() {
            return Err(AgentError::NoLegalActions);
        }
        let started = Instant::now();
        let generation = self.backend.generate(&observation.prompt, &self.params)?;
        let latency_ms = started.elapsed().as_secs_f64() * 1e3;
        let raw = generation.text;
        Ok(match parse_decision(&raw, &observation.legal_actions) {
            Ok(d) => AgentDecision {
                action: Some(d.action),
                proposed: Some(d.action.0 as i64),
                reasoning: d.reasoning,
                raw_response: raw,
                latency_ms,
            },
            Err(failure) => AgentDecision {
                action: None,
                proposed: failure.proposed(),
                reasoning: crate::backends::parse::extract(&raw)
                    .map(|e| e.reasoning)
                    .unwrap_or_default(),
                raw_response: raw,
                latency_ms,
            },
        })
    }
}

/// Outcome of a human submission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubmitOutcome {
    Accepted,
    Rejected { legal: Vec<ActionId> },
}

/// Notifications from a waiting human agent to whatever feeds it.
#[derive(Debug, Clone)]
pub enum HumanEvent {
    Awaiting(Observation),
    Rejected { proposed: i64, legal: Vec<ActionId> },
}

struct Submission {
    action: i64,
    reply: Sender<SubmitOutcome>,
}

/// Feeding side of a human agent's mailbox.
#[derive(Clone)]
pub struct HumanHandle {
    tx: Sender<Submission>,
}

impl HumanHandle {
    /// Blocks until the agent has judged the submission.
    pub fn submit(&self, action: i64) -> Result<SubmitOutcome, AgentError> {
        let (reply, outcome) = mpsc::channel();
        self.tx
            .send(Submission { action, reply })
            .map_err(|_| AgentError::Aborted("human agent is gone".into()))?;
        outcome
            .recv()
            .map_err(|_| AgentError::Aborted("human agent is gone".into()))
    }
}

/// Blocks on its mailbox until a legal action arrives; illegal submissions
/// are rejected and the agent keeps waiting.
pub struct HumanAgent {
    rx: Receiver<Submission>,
    events: Option<Sender<HumanEvent>>,
}

/// Creates a connected mailbox. Events, if requested, tell the feeder when
/// input is needed.
pub fn human_channel(with_events: bool) -> (HumanHandle, HumanAgent, Option<Receiver<HumanEvent>>) {
    let (tx, rx) = mpsc::channel();
    let (events, events_rx) = if with_events {
        let (etx, erx) = mpsc::channel();
        (Some(etx), Some(erx))
    } else {
        (None, None)
    };
    (HumanHandle { tx }, HumanAgent { rx, events }, events_rx)
}

impl HumanAgent {
    fn notify(&self, event: HumanEvent) {
        if let Some(tx) = &self.events {
            let _ = tx.send(event);
        }
    }
}

impl Agent for HumanAgent {
    fn compute_action(
        &mut self,
        observation: &Observation,
        _rng: &mut dyn RngCore,
    ) -> Result<AgentDecision, AgentError> {
        let started = Instant::now();
        self.notify(HumanEvent::Awaiting(observation.clone()));
        loop {
            let sub = self
                .rx
                .recv()
                .map_err(|_| AgentError::Aborted("human input channel closed".into()))?;
            let legal = &observation.legal_actions;
            let accepted = u32::try_from(sub.action)
                .ok()
                .map(ActionId)
                .filter(|a| legal.contains(a));
            match accepted {
                Some(action) => {
                    let _ = sub.reply.send(SubmitOutcome::Accepted);
                    return Ok(AgentDecision {
                        action: Some(action),
                        proposed: Some(sub.action),
                        reasoning: String::new(),
                        raw_response: sub.action.to_string(),
                        latency_ms: started.elapsed().as_secs_f64() * 1e3,
                    });
                }
                None => {
                    let _ = sub.reply.send(SubmitOutcome::Rejected { legal: legal.clone() });
                    self.notify(HumanEvent::Rejected {
                        proposed: sub.action,
                        legal: legal.clone(),
                    });
                }
            }
        }
    }
}

/// A console line holding one action integer.
pub fn parse_console_line(line: &str) -> Option<i64> {
    let t = line.trim();
    let digits = t.strip_prefix('-').unwrap_or(t);
    if digits.is_empty() || digits.len() > 18 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    t.parse().ok()
}

/// Human agent fed from a reader (normally stdin), echoing prompts to stderr.
pub fn console_human<R: BufRead + Send + 'static>(input: R) -> HumanAgent {
    let (handle, agent, events) = human_channel(true);
    let events = events.expect("events requested");
    std::thread::spawn(move || {
        let mut lines = input.lines();
        while let Ok(event) = events.recv() {
            match event {
                HumanEvent::Awaiting(obs) => eprintln!("{}\n> ", obs.prompt),
                HumanEvent::Rejected { legal, .. } => {
                    let ids: Vec<String> = legal.iter().map(|a| a.to_string()).collect();
                    eprintln!("Illegal move. Choose one of: {}\n> ", ids.join(", "));
                    continue;
                }
            }
            loop {
                let Some(Ok(line)) = lines.next() else { return };
                match parse_console_line(&line) {
                    Some(a) => match handle.submit(a) {
                        Ok(SubmitOutcome::Accepted) => break,
                        Ok(SubmitOutcome::Rejected { .. }) => {
                            // the Rejected event re-prompts
                            let _ = events.recv();
                            eprintln!("Illegal move, try again.\n> ");
                        }
                        Err(_) => return,
                    },
                    None => eprintln!("Please enter an action number.\n> "),
                }
            }
        }
    });
    agent
}

/// Supplies human agents for human seats.
pub trait HumanProvider: Sync {
    fn human_for(&self, player: PlayerId) -> Result<Box<dyn Agent>, AgentError>;
}

/// Reads human moves from standard input.
pub struct ConsoleHumans;

impl HumanProvider for ConsoleHumans {
    fn human_for(&self, _player: PlayerId) -> Result<Box<dyn Agent>, AgentError> {
        Ok(Box::new(console_human(std::io::BufReader::new(std::io::stdin()))))
    }
}

/// Refuses human seats; for unattended batch runs.
pub struct NoHumans;

impl HumanProvider for NoHumans {
    fn human_for(&self, player: PlayerId) -> Result<Box<dyn Agent>, AgentError> {
        Err(AgentError::Config(format!("seat {player} is human but no human input is available")))
    }
}

/// Checks seat coverage and descriptor validity without constructing anything.
pub fn validate_policies(config: &PolicyAssignment, meta: &GameMetadata) -> Result<(), AgentError> {
    for p in 0..meta.num_players {
        if !config.contains_key(&p) {
            return Err(AgentError::Config(format!("no agent assigned to seat {p}")));
        }
    }
    if let Some(extra) = config.keys().find(|&&p| p >= meta.num_players) {
        return Err(AgentError::Config(format!("seat {extra} does not exist in this game")));
    }
    config.values().try_for_each(AgentDescriptor::validate)
}

/// Builds a non-human agent from its descriptor.
pub fn build_agent(d: &AgentDescriptor, backends: &BackendPool) -> Result<Box<dyn Agent>, AgentError> {
    d.validate()?;
    match d.kind {
        AgentKind::Random => Ok(Box::new(RandomAgent)),
        AgentKind::Human => Err(AgentError::Config("human seats need a human provider".into())),
        AgentKind::Llm => {
            let backend = backends.get(d.backend.as_ref().expect("validated"))?;
            Ok(Box::new(LlmAgent::new(
                backend,
                GenerationParams {
                    model: d.model.clone().expect("validated"),
                    temperature: d.temperature,
                    max_tokens: d.max_tokens,
                },
            )))
        }
    }
}

/// Builds one agent per seat.
pub fn assign_policies(
    config: &PolicyAssignment,
    meta: &GameMetadata,
    backends: &BackendPool,
    humans: &dyn HumanProvider,
) -> Result<BTreeMap<PlayerId, Box<dyn Agent>>, AgentError> {
    validate_policies(config, meta)?;
    config
        .iter()
        .map(|(&player, d)| {
            let agent = match d.kind {
                AgentKind::Human => humans.human_for(player)?,
                _ => build_agent(d, backends)?,
            };
            Ok((player, agent))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream_rng;

    const TWO: GameMetadata = GameMetadata {
        num_players: 2,
        simultaneous: false,
        max_turns: 9,
    };

    fn obs(legal: &[u32]) -> Observation {
        Observation {
            player: 0,
            turn: 0,
            state_string: String::new(),
            legal_actions: legal.iter().copied().map(ActionId).collect(),
            prompt: "p".into(),
        }
    }

    #[test]
    fn random_is_reproducible() {
        let run = |seed| {
            let mut rng = stream_rng(seed, 0);
            let mut a = RandomAgent;
            (0..50)
                .map(|_| a.compute_action(&obs(&[0, 1]), &mut rng).unwrap().action.unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
        let d = RandomAgent.compute_action(&obs(&[5]), &mut stream_rng(0, 0)).unwrap();
        assert_eq!((d.reasoning.as_str(), d.latency_ms, d.parse_ok()), ("", 0.0, true));
    }

    #[test]
    fn llm_reads_reasoning() {
        let backend = Arc::new(crate::backends::ScriptedBackend::new([
            r#"{"reasoning":"Paper beats Rock","action":1}"#,
        ]));
        let mut agent = LlmAgent::new(
            backend,
            GenerationParams {
                model: "m".into(),
                temperature: 0.0,
                max_tokens: 512,
            },
        );
        let d = agent.compute_action(&obs(&[0, 1, 2]), &mut stream_rng(0, 0)).unwrap();
        assert_eq!(d.action, Some(ActionId(1)));
        assert_eq!(d.reasoning, "Paper beats Rock");
        assert!(d.latency_ms >= 0.0);
    }

    #[test]
    fn llm_unparseable_is_flagged() {
        let backend = Arc::new(crate::backends::ScriptedBackend::new(["no idea", "{\"action\": 7}"]));
        let params = GenerationParams {
            model: "m".into(),
            temperature: 0.0,
            max_tokens: 512,
        };
        let mut agent = LlmAgent::new(backend, params);
        let d = agent.compute_action(&obs(&[0, 1]), &mut stream_rng(0, 0)).unwrap();
        assert!(!d.parse_ok());
        assert_eq!(d.proposed, None);
        let d = agent.compute_action(&obs(&[0, 1]), &mut stream_rng(0, 0)).unwrap();
        assert_eq!((d.parse_ok(), d.proposed), (false, Some(7)));
    }

    #[test]
    fn human_rejects_illegal_then_accepts() {
        let (handle, mut agent, _) = human_channel(false);
        let feeder = std::thread::spawn(move || {
            let first = handle.submit(4).unwrap();
            let second = handle.submit(1).unwrap();
            (first, second)
        });
        let d = agent.compute_action(&obs(&[0, 1]), &mut stream_rng(0, 0)).unwrap();
        assert_eq!(d.action, Some(ActionId(1)));
        let (first, second) = feeder.join().unwrap();
        assert_eq!(first, SubmitOutcome::Rejected { legal: vec![ActionId(0), ActionId(1)] });
        assert_eq!(second, SubmitOutcome::Accepted);
    }

    #[test]
    fn human_closed_channel_aborts() {
        let (handle, mut agent, _) = human_channel(false);
        drop(handle);
        assert!(matches!(
            agent.compute_action(&obs(&[0]), &mut stream_rng(0, 0)),
            Err(AgentError::Aborted(_))
        ));
    }

    #[test]
    fn console_feeds_agent() {
        let input = std::io::Cursor::new(b"abc\n9\n2\n".to_vec());
        let mut agent = console_human(input);
        let d = agent.compute_action(&obs(&[0, 1, 2]), &mut stream_rng(0, 0)).unwrap();
        assert_eq!(d.action, Some(ActionId(2)));
    }

    #[test]
    fn console_line_parsing() {
        assert_eq!(parse_console_line(" 4 \n"), Some(4));
        assert_eq!(parse_console_line("-1"), Some(-1));
        assert_eq!(parse_console_line("four"), None);
        assert_eq!(parse_console_line(""), None);
        assert_eq!(parse_console_line("99999999999999999999"), None);
    }

    #[test]
    fn policy_coverage() {
        let pool = BackendPool::new();
        let llm = AgentDescriptor::llm("modelA", BackendRef::scripted(["0"]));
        let mixed = PolicyAssignment::from([(0, llm.clone()), (1, AgentDescriptor::random())]);
        assert_eq!(assign_policies(&mixed, &TWO, &pool, &NoHumans).unwrap().len(), 2);
        let selfplay = PolicyAssignment::from([(0, llm.clone()), (1, llm)]);
        assert!(assign_policies(&selfplay, &TWO, &pool, &NoHumans).is_ok());
        let missing = PolicyAssignment::from([(0, AgentDescriptor::random())]);
        assert!(matches!(assign_policies(&missing, &TWO, &pool, &NoHumans), Err(AgentError::Config(_))));
        let mut bare = AgentDescriptor::random();
        bare.kind = AgentKind::Llm;
        let no_backend = PolicyAssignment::from([(0, bare), (1, AgentDescriptor::random())]);
        assert!(matches!(validate_policies(&no_backend, &TWO), Err(AgentError::Config(_))));
    }

    #[test]
    fn unknown_kind_fails_to_deserialize() {
        let r: Result<PolicyAssignment, _> = serde_json::from_str(r#"{"0": {"kind": "oracle"}}"#);
        assert!(r.is_err());
        let ok: PolicyAssignment = serde_json::from_str(r#"{"0": {"kind": "random"}, "1": {"kind": "human"}}"#).unwrap();
        assert_eq!(ok[&1].kind, AgentKind::Human);
        assert_eq!(ok[&0].max_tokens, 512);
    }
}
