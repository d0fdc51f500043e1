//! Turns raw model text into an `(action, reasoning)` pair.
//!
//! Extraction tries, in order: the whole text as a JSON object; the first
//! balanced `{...}` block that carries an `action` key (single-quoted
//! pseudo-JSON is normalised first); an `"action": N` pattern anywhere; a
//! reply that is nothing but one integer. The first stage that yields an
//! integer decides, and that integer must be one of the legal actions.

use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::engine::ActionId;

/// Candidate blocks tried per input.
const MAX_BLOCKS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseMethod {
    Strict,
    Block,
    Pattern,
    BareInteger,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extracted {
    pub action: i64,
    pub reasoning: String,
    pub method: ParseMethod,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDecision {
    pub action: ActionId,
    pub reasoning: String,
    pub method: ParseMethod,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseFailure {
    #[error("no action found in model output")]
    NoAction,
    #[error("model proposed action {0}, which is not legal")]
    IllegalAction(i64),
}

impl ParseFailure {
    /// The integer the model proposed, if any.
    pub fn proposed(&self) -> Option<i64> {
        match self {
            ParseFailure::NoAction => None,
            ParseFailure::IllegalAction(a) => Some(*a),
        }
    }
}

pub fn parse_decision(raw: &str, legal: &[ActionId]) -> Result<ParsedDecision, ParseFailure> {
    let found = extract(raw).ok_or(ParseFailure::NoAction)?;
    match u32::try_from(found.action).map(ActionId) {
        Ok(a) if legal.contains(&a) => Ok(ParsedDecision {
            action: a,
            reasoning: found.reasoning,
            method: found.method,
        }),
        _ => Err(ParseFailure::IllegalAction(found.action)),
    }
}

/// Runs the extraction stages without the legality check.
pub fn extract(raw: &str) -> Option<Extracted> {
    strict_parse(raw)
        .or_else(|| block_parse(raw))
        .or_else(|| pattern_parse(raw))
        .or_else(|| bare_integer(raw))
}

fn integer_of(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_u64().map(|u| i64::try_from(u).unwrap_or(i64::MAX))),
        _ => None,
    }
}

fn reasoning_of(obj: &Map<String, Value>) -> String {
    match obj.get("reasoning") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    }
}

fn from_object(obj: &Map<String, Value>, method: ParseMethod) -> Option<Extracted> {
    let action = integer_of(obj.get("action")?)?;
    Some(Extracted {
        action,
        reasoning: reasoning_of(obj),
        method,
    })
}

pub fn strict_parse(raw: &str) -> Option<Extracted> {
    match serde_json::from_str::<Value>(raw) {
        Ok(Value::Object(obj)) => from_object(&obj, ParseMethod::Strict),
        _ => None,
    }
}

pub fn block_parse(raw: &str) -> Option<Extracted> {
    for (start, end) in candidate_blocks(raw) {
        let block = &raw[start..end];
        let obj = match serde_json::from_str::<Value>(block) {
            Ok(Value::Object(obj)) => Some(obj),
            _ => match serde_json::from_str::<Value>(&normalize_quotes(block)) {
                Ok(Value::Object(obj)) => Some(obj),
                _ => None,
            },
        };
        if let Some(obj) = obj {
            if obj.contains_key("action") {
                // First block with the key decides; a non-integer value falls
                // through to the later stages.
                return from_object(&obj, ParseMethod::Block);
            }
        }
    }
    None
}

#[derive(Clone, Copy, PartialEq)]
enum QuoteMode {
    Double,
    Both,
    Ignore,
}

/// Balanced `{...}` spans ordered by start offset, from three scans that
/// disagree about what counts as a string literal.
fn candidate_blocks(text: &str) -> Vec<(usize, usize)> {
    if !text.contains("action") {
        return Vec::new();
    }
    let mut spans = Vec::new();
    for mode in [QuoteMode::Double, QuoteMode::Both, QuoteMode::Ignore] {
        for span in scan_blocks(text.as_bytes(), mode) {
            if !spans.contains(&span) && text[span.0..span.1].contains("action") {
                spans.push(span);
            }
        }
    }
    spans.sort_by_key(|&(s, e)| (s, std::cmp::Reverse(e)));
    spans.truncate(MAX_BLOCKS);
    spans
}

fn scan_blocks(bytes: &[u8], mode: QuoteMode) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let in_block = !stack.is_empty();
        match b {
            b'{' => stack.push(i),
            b'}' => {
                if let Some(start) = stack.pop() {
                    out.push((start, i + 1));
                }
            }
            b'"' if in_block && mode != QuoteMode::Ignore => {
                i = skip_string(bytes, i, b'"');
                continue;
            }
            b'\'' if in_block && mode == QuoteMode::Both => {
                i = skip_string(bytes, i, b'\'');
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    out
}

/// Index just past the literal opening at `open`. A single quote only
/// closes a literal when structural punctuation follows it, so apostrophes
/// inside prose survive.
fn skip_string(bytes: &[u8], open: usize, quote: u8) -> usize {
    let mut i = open + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => i += 2,
            b if b == quote && (quote == b'"' || closes_single(bytes, i)) => return i + 1,
            _ => i += 1,
        }
    }
    bytes.len()
}

fn closes_single(bytes: &[u8], at: usize) -> bool {
    let rest = bytes[at + 1..].iter().find(|b| !b.is_ascii_whitespace());
    matches!(rest, None | Some(b',' | b'}' | b']' | b':'))
}

/// Rewrites single-quoted pseudo-JSON (Python dict style) as JSON.
pub fn normalize_quotes(block: &str) -> String {
    let bytes = block.as_bytes();
    let mut out = String::with_capacity(block.len() + 8);
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'"' => {
                let end = skip_string(bytes, i, b'"');
                out.push_str(&block[i..end]);
                i = end;
            }
            b'\'' => {
                let end = skip_string(bytes, i, b'\'');
                let inner_end = if end > i + 1 && bytes[end - 1] == b'\'' { end - 1 } else { end };
                let inner = block[i + 1..inner_end.max(i + 1)].replace("\\'", "'");
                out.push_str(&serde_json::to_string(&inner).unwrap_or_default());
                i = end;
            }
            b',' => {
                let next = bytes[i + 1..].iter().find(|b| !b.is_ascii_whitespace());
                if !matches!(next, Some(b'}' | b']')) {
                    out.push(',');
                }
                i += 1;
            }
            _ => {
                let rest = &block[i..];
                let literal = [("True", "true"), ("False", "false"), ("None", "null")]
                    .into_iter()
                    .find(|(py, _)| rest.starts_with(py) && word_edge(bytes, i, py.len()));
                match literal {
                    Some((py, json)) => {
                        out.push_str(json);
                        i += py.len();
                    }
                    None => {
                        let ch = rest.chars().next().expect("in bounds");
                        out.push(ch);
                        i += ch.len_utf8();
                    }
                }
            }
        }
    }
    out
}

fn word_edge(bytes: &[u8], start: usize, len: usize) -> bool {
    let before = start.checked_sub(1).map(|j| bytes[j]);
    let after = bytes.get(start + len).copied();
    let is_word = |b: Option<u8>| b.is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_');
    !is_word(before) && !is_word(after)
}

fn action_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"["']action["']\s*[:=]\s*(-?\d+)"#).expect("valid regex"))
}

fn reasoning_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"["']reasoning["']\s*[:=]\s*(?:"((?:[^"\\]|\\.)*)"|'((?:[^'\\]|\\.)*)')"#)
            .expect("valid regex")
    })
}

fn saturating_int(digits: &str) -> i64 {
    digits.parse::<i64>().unwrap_or(if digits.starts_with('-') {
        i64::MIN
    } else {
        i64::MAX
    })
}

pub fn pattern_parse(raw: &str) -> Option<Extracted> {
    let caps = action_pattern().captures_iter(raw).find(|c| {
        let end = c.get(0).expect("whole match").end();
        // `"action": 4.5` is not an integer
        let rest = &raw.as_bytes()[end..];
        !(rest.first() == Some(&b'.') && rest.get(1).is_some_and(u8::is_ascii_digit))
    })?;
    let action = saturating_int(&caps[1]);
    let reasoning = reasoning_pattern()
        .captures(raw)
        .map(|c| match (c.get(1), c.get(2)) {
            (Some(d), _) => serde_json::from_str::<String>(&format!("\"{}\"", d.as_str()))
                .unwrap_or_else(|_| d.as_str().to_string()),
            (None, Some(s)) => s.as_str().replace("\\'", "'"),
            _ => String::new(),
        })
        .unwrap_or_default();
    Some(Extracted {
        action,
        reasoning,
        method: ParseMethod::Pattern,
    })
}

pub fn bare_integer(raw: &str) -> Option<Extracted> {
    let t = raw.trim();
    let digits = t.strip_prefix('-').unwrap_or(t);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some(Extracted {
        action: saturating_int(t),
        reasoning: String::new(),
        method: ParseMethod::BareInteger,
    })
}
