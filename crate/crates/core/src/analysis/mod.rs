//! Reasoning classification, game-play metrics and report tables.

mod classify;
mod oracle;
mod report;
mod stats;

use thiserror::Error;

pub use classify::{
    classify_reasoning, reasoning_length, tokenize, Classification, Lexicon, ReasoningDistribution,
    ReasoningLabel,
};
pub use oracle::{decision_optimality, episode_optimality, minimax_optimal_actions, optimal_actions};
pub use report::{
    build_report, emit_report, fixed, DistributionRow, EntropyRow, MetricsRow, Report, ReportOptions,
    TurnBinRow, POOLED, REPORT_FILES,
};
pub use stats::{bin_by_turn, bin_index, bootstrap_ci, entropy_bits, metric_summary, quantile, MetricSummary};

use crate::engine::EngineError;
use crate::tracestore::StoreError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no values to summarise")]
    Empty,
    #[error("{0}")]
    Contract(String),
    #[error("no optimality oracle for `{0}`")]
    Unsupported(String),
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("unknown run `{0}`")]
    UnknownRun(String),
    #[error("report output: {0}")]
    Io(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}
