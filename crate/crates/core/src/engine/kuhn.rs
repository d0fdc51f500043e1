//! Three-card Kuhn poker: ante 1 each, one betting round.
//!
//! Action 0 checks when no bet is outstanding and folds when facing one;
//! action 1 bets or calls.

use rand::Rng;
use serde_json::json;

use super::{
    ActionId, EngineError, Game, GameMetadata, GameSpec, JointAction, Payload, PlayerId, Rewards,
    Transition,
};
use crate::seed::{stream_rng, DEAL_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Card {
    Jack,
    Queen,
    King,
}

impl Card {
    pub fn name(self) -> &'static str {
        match self {
            Card::Jack => "Jack",
            Card::Queen => "Queen",
            Card::King => "King",
        }
    }
}

/// All six ordered deals `(player 0 card, player 1 card)`.
pub const DEALS: [(Card, Card); 6] = [
    (Card::Jack, Card::Queen),
    (Card::Jack, Card::King),
    (Card::Queen, Card::Jack),
    (Card::Queen, Card::King),
    (Card::King, Card::Jack),
    (Card::King, Card::Queen),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KuhnMove {
    Check,
    Bet,
    Call,
    Fold,
}

impl KuhnMove {
    pub fn name(self) -> &'static str {
        match self {
            KuhnMove::Check => "Check",
            KuhnMove::Bet => "Bet",
            KuhnMove::Call => "Call",
            KuhnMove::Fold => "Fold",
        }
    }

    fn adds_chip(self) -> bool {
        matches!(self, KuhnMove::Bet | KuhnMove::Call)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KuhnHand {
    pub cards: [Card; 2],
    pub history: Vec<KuhnMove>,
}

impl KuhnHand {
    pub fn new(cards: [Card; 2]) -> Self {
        Self {
            cards,
            history: Vec::new(),
        }
    }

    pub fn current(&self) -> PlayerId {
        self.history.len() % 2
    }

    pub fn facing_bet(&self) -> bool {
        self.history.last() == Some(&KuhnMove::Bet)
    }

    pub fn contribution(&self, player: PlayerId) -> u32 {
        1 + self
            .history
            .iter()
            .enumerate()
            .filter(|(i, m)| i % 2 == player && m.adds_chip())
            .count() as u32
    }

    pub fn pot(&self) -> u32 {
        self.contribution(0) + self.contribution(1)
    }

    pub fn is_terminal(&self) -> bool {
        use KuhnMove::*;
        matches!(
            self.history.as_slice(),
            [Check, Check] | [Bet, Call] | [Bet, Fold] | [Check, Bet, Call] | [Check, Bet, Fold]
        )
    }

    pub fn interpret(&self, action: ActionId) -> KuhnMove {
        match (self.facing_bet(), action.0) {
            (false, 0) => KuhnMove::Check,
            (false, _) => KuhnMove::Bet,
            (true, 0) => KuhnMove::Fold,
            (true, _) => KuhnMove::Call,
        }
    }

    /// Net chips per player at a terminal history.
    pub fn payoff(&self) -> Rewards {
        debug_assert!(self.is_terminal());
        let winner = match self.history.last() {
            Some(KuhnMove::Fold) => 1 - (self.history.len() - 1) % 2,
            _ => usize::from(self.cards[1] > self.cards[0]),
        };
        let won = self.contribution(1 - winner) as f64;
        [(winner, won), (1 - winner, -won)].into_iter().collect()
    }

    /// `['Check', 'Bet']`
    pub fn history_text(&self) -> String {
        let items: Vec<String> = self.history.iter().map(|m| format!("'{}'", m.name())).collect();
        format!("[{}]", items.join(", "))
    }
}

pub(super) struct KuhnGame;

impl KuhnGame {
    pub(super) fn construct(spec: &GameSpec) -> Result<KuhnGame, EngineError> {
        spec.check_keys(&[])?;
        Ok(KuhnGame)
    }

    fn hand(payload: &Payload) -> &KuhnHand {
        match payload {
            Payload::Kuhn(h) => h,
            _ => unreachable!("kuhn game given foreign payload"),
        }
    }
}

impl Game for KuhnGame {
    fn name(&self) -> &str {
        "kuhn_poker"
    }

    fn title(&self) -> &str {
        "Kuhn Poker"
    }

    fn metadata(&self) -> GameMetadata {
        GameMetadata {
            num_players: 2,
            simultaneous: false,
            max_turns: 3,
        }
    }

    fn initial(&self, seed: u64) -> (Payload, Vec<PlayerId>) {
        let deal = DEALS[stream_rng(seed, DEAL_STREAM).random_range(0..DEALS.len())];
        (Payload::Kuhn(KuhnHand::new([deal.0, deal.1])), vec![0])
    }

    fn legal(&self, _payload: &Payload, _player: PlayerId) -> Vec<ActionId> {
        vec![ActionId(0), ActionId(1)]
    }

    fn transition(&self, payload: &Payload, actions: &JointAction) -> Transition {
        let mut hand = Self::hand(payload).clone();
        let (_, &action) = actions.iter().next().expect("one action");
        let mv = hand.interpret(action);
        hand.history.push(mv);
        let terminal = hand.is_terminal();
        let rewards = if terminal {
            hand.payoff()
        } else {
            [(0, 0.0), (1, 0.0)].into_iter().collect()
        };
        let next = hand.current();
        Transition {
            payload: Payload::Kuhn(hand),
            rewards,
            terminal,
            to_move: vec![next],
        }
    }

    fn render(&self, payload: &Payload, player: PlayerId) -> String {
        let hand = Self::hand(payload);
        format!(
            "Private card: {}\nBetting history: {}\nPot: {} chips\nYour contribution: {} chips",
            hand.cards[player].name(),
            hand.history_text(),
            hand.pot(),
            hand.contribution(player)
        )
    }

    fn action_label(&self, payload: &Payload, _player: PlayerId, action: ActionId) -> String {
        match Self::hand(payload).interpret(action) {
            KuhnMove::Check => "Check (stay in the game without betting)",
            KuhnMove::Bet => "Bet (add a chip to the pot)",
            KuhnMove::Fold => "Fold (give up the hand and the pot)",
            KuhnMove::Call => "Call (match the bet)",
        }
        .to_string()
    }

    fn view(&self, payload: &Payload, player: PlayerId) -> serde_json::Value {
        let hand = Self::hand(payload);
        json!({
            "kind": "kuhn",
            "card": hand.cards[player].name(),
            "history": hand.history.iter().map(|m| m.name()).collect::<Vec<_>>(),
            "pot": hand.pot(),
            "contribution": hand.contribution(player),
        })
    }

    fn zero_sum(&self) -> bool {
        true
    }
}
