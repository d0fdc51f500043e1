//! Lexical reasoning taxonomy.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Reasoning categories, declared in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReasoningLabel {
    Positional,
    OpponentModeling,
    Blocking,
    WinningLogic,
    HeuristicBased,
    RuleBased,
    RandomUnjustified,
    Uncategorized,
}

impl ReasoningLabel {
    pub const ALL: [ReasoningLabel; 8] = [
        ReasoningLabel::Positional,
        ReasoningLabel::OpponentModeling,
        ReasoningLabel::Blocking,
        ReasoningLabel::WinningLogic,
        ReasoningLabel::HeuristicBased,
        ReasoningLabel::RuleBased,
        ReasoningLabel::RandomUnjustified,
        ReasoningLabel::Uncategorized,
    ];

    /// Labels that have cue phrases.
    pub const CUED: [ReasoningLabel; 7] = [
        ReasoningLabel::Positional,
        ReasoningLabel::OpponentModeling,
        ReasoningLabel::Blocking,
        ReasoningLabel::WinningLogic,
        ReasoningLabel::HeuristicBased,
        ReasoningLabel::RuleBased,
        ReasoningLabel::RandomUnjustified,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReasoningLabel::Positional => "Positional",
            ReasoningLabel::OpponentModeling => "OpponentModeling",
            ReasoningLabel::Blocking => "Blocking",
            ReasoningLabel::WinningLogic => "WinningLogic",
            ReasoningLabel::HeuristicBased => "HeuristicBased",
            ReasoningLabel::RuleBased => "RuleBased",
            ReasoningLabel::RandomUnjustified => "RandomUnjustified",
            ReasoningLabel::Uncategorized => "Uncategorized",
        }
    }
}

impl fmt::Display for ReasoningLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReasoningLabel {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReasoningLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| AnalysisError::Lexicon(format!("unknown label `{s}`")))
    }
}

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Cue {
    phrase: String,
    tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    cues: BTreeMap<ReasoningLabel, Vec<Cue>>,
}

const DEFAULTS: [(ReasoningLabel, &[&str]); 7] = [
    (ReasoningLabel::Positional, &["center column", "center square", "corner", "edge"]),
    (
        ReasoningLabel::OpponentModeling,
        &["opponent", "they are trying", "their strategy", "their move"],
    ),
    (
        ReasoningLabel::Blocking,
        &["block", "prevent", "stop opponent", "avoid opponent", "counter"],
    ),
    (
        ReasoningLabel::WinningLogic,
        &["win", "winning move", "connect", "fork", "threat", "chance of winning"],
    ),
    (
        ReasoningLabel::HeuristicBased,
        &["best move", "most likely", "advantageous", "better chance"],
    ),
    (ReasoningLabel::RuleBased, &["according to", "rule", "strategy"]),
    (ReasoningLabel::RandomUnjustified, &["random", "guess"]),
];

impl Default for Lexicon {
    fn default() -> Self {
        let mut lex = Lexicon {
            cues: BTreeMap::new(),
        };
        for (label, phrases) in DEFAULTS {
            lex.set(label, phrases.iter().copied()).expect("default lexicon is valid");
        }
        lex
    }
}

impl Lexicon {
    pub fn phrases(&self, label: ReasoningLabel) -> Vec<&str> {
        self.cues
            .get(&label)
            .map(|c| c.iter().map(|c| c.phrase.as_str()).collect())
            .unwrap_or_default()
    }

    /// Replaces the cue list of `label`. Phrases are lowercased.
    pub fn set<I, S>(&mut self, label: ReasoningLabel, phrases: I) -> Result<(), AnalysisError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if label == ReasoningLabel::Uncategorized {
            return Err(AnalysisError::Lexicon("Uncategorized takes no cue phrases".into()));
        }
        let mut cues = Vec::new();
        for p in phrases {
            let phrase = p.as_ref().trim().to_lowercase();
            let tokens = tokenize(&phrase);
            if tokens.is_empty() {
                return Err(AnalysisError::Lexicon(format!(
                    "cue `{}` for {label} has no word characters",
                    p.as_ref()
                )));
            }
            cues.push(Cue { phrase, tokens });
        }
        self.cues.insert(label, cues);
        Ok(())
    }

    /// Defaults overridden by a JSON object of `label -> [phrase, ...]`.
    /// Labels absent from the document keep their default cues.
    pub fn from_json(text: &str) -> Result<Self, AnalysisError> {
        let doc: BTreeMap<String, Vec<String>> =
            serde_json::from_str(text).map_err(|e| AnalysisError::Lexicon(e.to_string()))?;
        let mut lex = Lexicon::default();
        for (name, phrases) in doc {
            lex.set(name.parse()?, phrases)?;
        }
        Ok(lex)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, AnalysisError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AnalysisError::Lexicon(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub label: ReasoningLabel,
    /// Cue occurrences per label with at least one match.
    pub counts: BTreeMap<ReasoningLabel, usize>,
}

fn occurrences(haystack: &[String], needle: &[String]) -> usize {
    if needle.len() > haystack.len() {
        return 0;
    }
    haystack.windows(needle.len()).filter(|w| *w == needle).count()
}

pub fn classify_reasoning(text: &str, lexicon: &Lexicon) -> Classification {
    let tokens = tokenize(text);
    let counts: BTreeMap<ReasoningLabel, usize> = lexicon
        .cues
        .iter()
        .map(|(&label, cues)| (label, cues.iter().map(|c| occurrences(&tokens, &c.tokens)).sum()))
        .filter(|&(_, n)| n > 0)
        .collect();
    // BTreeMap iterates in tie-break order, so the first maximum wins.
    let label = counts
        .iter()
        .fold(None, |best: Option<(ReasoningLabel, usize)>, (&l, &n)| match best {
            Some((_, m)) if m >= n => best,
            _ => Some((l, n)),
        })
        .map(|(l, _)| l)
        .unwrap_or(ReasoningLabel::Uncategorized);
    Classification { label, counts }
}

/// Whitespace-separated token count.
pub fn reasoning_length(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Label counts and proportions for one cell of a report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReasoningDistribution {
    pub counts: BTreeMap<ReasoningLabel, usize>,
}

impl ReasoningDistribution {
    pub fn add(&mut self, label: ReasoningLabel) {
        *self.counts.entry(label).or_default() += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn count(&self, label: ReasoningLabel) -> usize {
        self.counts.get(&label).copied().unwrap_or(0)
    }

    /// Proportions over all eight labels; all zeros when empty.
    pub fn proportions(&self) -> [f64; 8] {
        let total = self.total();
        let mut out = [0.0; 8];
        if total > 0 {
            for (i, l) in ReasoningLabel::ALL.iter().enumerate() {
                out[i] = self.count(*l) as f64 / total as f64;
            }
        }
        out
    }
}
