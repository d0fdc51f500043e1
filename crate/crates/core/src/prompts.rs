//! Observation packets and the model-facing prompt text.
//!
//! Every prompt is a game-specific body followed by a fixed wrapper that asks
//! for reasoning first and a JSON reply second. The body uses a generic
//! template (game name, role, move number, board, labelled actions) that
//! games with hidden information or round history extend.

use serde::Serialize;
use thiserror::Error;

use crate::engine::{ActionId, EngineError, GameState, KuhnHand, Payload, PlayerId};

/// Trailing block appended to every prompt, byte for byte.
pub const WRAPPER: &str = "First, think through the game strategy and explain your reasoning.\n\
Only after that, decide on the best action to take.\n\
\n\
Reply only in the following JSON format:\n\
{\n  'reasoning': <str>,\n  'action': <int>\n}";

const GENERIC_ASK: &str = "What action do you choose? Reply only with the number of one available action.";

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("prompt already carries the reply-format wrapper")]
    AlreadyWrapped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionLabel {
    pub id: ActionId,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub player: PlayerId,
    pub turn: u32,
    pub state_string: String,
    pub legal_actions: Vec<ActionId>,
    pub prompt: String,
}

pub fn build_observation(state: &GameState, player: PlayerId) -> Result<Observation, PromptError> {
    let legal_actions = state.legal_actions(player)?;
    let prompt = wrap_prompt(&game_prompt(state, player)?)?;
    Ok(Observation {
        player,
        turn: state.turn(),
        state_string: state.state_string(player),
        legal_actions,
        prompt,
    })
}

pub fn wrap_prompt(core: &str) -> Result<String, PromptError> {
    if core.contains(WRAPPER) {
        return Err(PromptError::AlreadyWrapped);
    }
    Ok(format!("{core}\n\n{WRAPPER}"))
}

pub fn action_labels(state: &GameState, player: PlayerId) -> Result<Vec<ActionLabel>, PromptError> {
    Ok(state
        .legal_actions(player)?
        .into_iter()
        .map(|id| ActionLabel {
            id,
            label: state.action_label(player, id),
        })
        .collect())
}

fn render_actions(labels: &[ActionLabel]) -> String {
    let lines: Vec<String> = labels.iter().map(|a| format!("{}: {}", a.id, a.label)).collect();
    format!("Available actions:\n{}", lines.join("\n"))
}

/// Unwrapped prompt body for `player`.
pub fn game_prompt(state: &GameState, player: PlayerId) -> Result<String, PromptError> {
    let labels = action_labels(state, player)?;
    let title = state.game().title();
    let move_number = state.turn() + 1;
    Ok(match state.payload() {
        Payload::Kuhn(hand) => kuhn_prompt(title, player, move_number, hand, &labels),
        Payload::Grid(_) => {
            let glyph = if player == 0 { 'x' } else { 'o' };
            format!(
                "You are Player {player} in the game {title}.\n\
                 You play as '{glyph}'.\n\
                 This is move number: {move_number}\n\
                 Current board:\n{board}\n\n{actions}\n\n{GENERIC_ASK}",
                board = state.state_string(player),
                actions = render_actions(&labels),
            )
        }
        Payload::Matrix(m) => {
            let names = m.kind.move_names();
            let mut payoffs = String::from("Payoffs (yours, opponent's):");
            for (a, mine) in names.iter().enumerate() {
                for (b, theirs) in names.iter().enumerate() {
                    let (ours, other) = ordered(player, a as u32, b as u32);
                    let (r0, r1) = m.kind.payoff(ActionId(ours), ActionId(other));
                    let (me, them) = if player == 0 { (r0, r1) } else { (r1, r0) };
                    payoffs.push_str(&format!("\nYou play {mine}, opponent plays {theirs}: {me}, {them}"));
                }
            }
            format!(
                "You are Player {player} in the game {title}.\n\
                 This is move number: {move_number}\n\
                 Both players choose simultaneously.\n\
                 Current state:\n{state_text}\n\n{payoffs}\n\n{actions}\n\n{GENERIC_ASK}",
                state_text = state.state_string(player),
                actions = render_actions(&labels),
            )
        }
    })
}

/// Joint action `(player 0, player 1)` when `player` plays `mine`.
fn ordered(player: PlayerId, mine: u32, theirs: u32) -> (u32, u32) {
    if player == 0 {
        (mine, theirs)
    } else {
        (theirs, mine)
    }
}

fn kuhn_prompt(
    title: &str,
    player: PlayerId,
    move_number: u32,
    hand: &KuhnHand,
    labels: &[ActionLabel],
) -> String {
    let ids: Vec<String> = labels.iter().map(|a| format!("'{}'", a.id)).collect();
    format!(
        "You are Player {player} in the game {title}.\n\
         Your private card: {card}\n\
         This is move number: {move_number}\n\
         Betting history: {history}\n\
         Total pot size: {pot} chips\n\
         Your contribution: {contribution} chips\n\n\
         {actions}\n\n\
         What action do you choose? Reply only with {choices}.",
        card = hand.cards[player].name(),
        history = hand.history_text(),
        pot = hand.pot(),
        contribution = hand.contribution(player),
        actions = render_actions(labels),
        choices = ids.join(" or "),
    )
}
