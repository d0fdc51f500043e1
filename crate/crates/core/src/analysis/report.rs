//! CSV tables behind the reasoning and performance figures.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::classify::{classify_reasoning, reasoning_length, Lexicon, ReasoningDistribution, ReasoningLabel};
use super::oracle::episode_optimality;
use super::stats::{bin_index, bootstrap_ci, entropy_bits, metric_summary};
use super::AnalysisError;
use crate::engine::{GameSpec, PlayerId};
use crate::runner::{EpisodeStatus, MoveRecord};
use crate::tracestore::{MoveFilter, TraceStore};

pub const POOLED: &str = "pooled";

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub bins: u32,
    pub lexicon: Lexicon,
    pub resamples: usize,
    pub alpha: f64,
    pub bootstrap_seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            bins: 3,
            lexicon: Lexicon::default(),
            resamples: 1000,
            alpha: 0.05,
            bootstrap_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionRow {
    pub agent: String,
    pub game: String,
    pub label: ReasoningLabel,
    pub count: usize,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnBinRow {
    pub agent: String,
    pub game: String,
    pub bin: u32,
    pub label: ReasoningLabel,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRow {
    pub game: String,
    pub agent_scope: String,
    pub bin: u32,
    pub entropy_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub agent: String,
    pub game: String,
    pub mean_reward: Option<f64>,
    pub stderr: Option<f64>,
    pub max_cum_reward: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub illegal_rate: f64,
    pub optimality: Option<f64>,
    pub mean_reasoning_len: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub distribution: Vec<DistributionRow>,
    pub turn_bins: Vec<TurnBinRow>,
    pub entropy: Vec<EntropyRow>,
    pub metrics: Vec<MetricsRow>,
}

type Cell = (String, String);

#[derive(Default)]
struct CellData {
    overall: ReasoningDistribution,
    by_bin: BTreeMap<u32, ReasoningDistribution>,
    moves: usize,
    illegal: usize,
    words: usize,
    rewards: Vec<f64>,
    optimal: usize,
    judged: usize,
}

fn game_specs(config: Option<&str>) -> BTreeMap<String, GameSpec> {
    config
        .and_then(|c| serde_json::from_str::<serde_json::Value>(c).ok())
        .and_then(|v| v.get("games").cloned())
        .and_then(|g| serde_json::from_value::<Vec<GameSpec>>(g).ok())
        .unwrap_or_default()
        .into_iter()
        .map(|s| (s.name.clone(), s))
        .collect()
}

/// Computes every report table for `run_id`.
pub fn build_report(store: &TraceStore, run_id: &str, opts: &ReportOptions) -> Result<Report, AnalysisError> {
    if opts.bins == 0 {
        return Err(AnalysisError::Contract("bins must be at least 1".into()));
    }
    let run = store
        .run(run_id)?
        .ok_or_else(|| AnalysisError::UnknownRun(run_id.to_string()))?;
    let specs = game_specs(run.config.as_deref());
    let seats = store.agent_labels()?.remove(run_id).unwrap_or_default();
    let label_of = |p: PlayerId| seats.get(&p).cloned().unwrap_or_else(|| "unknown".into());
    let episodes = store.episodes(Some(run_id))?;
    let rows = store.query_moves(&MoveFilter::run(run_id))?;

    let mut max_turn: BTreeMap<&str, u32> = BTreeMap::new();
    for r in &rows {
        let t = max_turn.entry(r.game.as_str()).or_default();
        *t = (*t).max(r.record.turn);
    }

    let mut cells: BTreeMap<Cell, CellData> = BTreeMap::new();
    let mut pooled: BTreeMap<(String, u32), ReasoningDistribution> = BTreeMap::new();
    for r in &rows {
        let label = classify_reasoning(&r.record.reasoning, &opts.lexicon).label;
        let bin = bin_index(r.record.turn, max_turn[r.game.as_str()], opts.bins);
        let c = cells.entry((r.agent.clone(), r.game.clone())).or_default();
        c.overall.add(label);
        c.by_bin.entry(bin).or_default().add(label);
        c.moves += 1;
        c.illegal += r.record.illegal as usize;
        c.words += reasoning_length(&r.record.reasoning);
        pooled.entry((r.game.clone(), bin)).or_default().add(label);
    }

    let mut by_episode: BTreeMap<i64, Vec<MoveRecord>> = BTreeMap::new();
    for r in rows {
        by_episode.entry(r.record.episode_id).or_default().push(r.record);
    }
    for e in &episodes {
        let spec = specs.get(&e.game).cloned().unwrap_or_else(|| GameSpec::new(e.game.clone()));
        if e.status != EpisodeStatus::Aborted {
            for (&p, &r) in &e.rewards {
                cells.entry((label_of(p), e.game.clone())).or_default().rewards.push(r);
            }
        }
        let moves = by_episode.get(&e.episode_id).map(Vec::as_slice).unwrap_or(&[]);
        for (p, (k, n)) in episode_optimality(&spec, e.seed, moves)? {
            let c = cells.entry((label_of(p), e.game.clone())).or_default();
            c.optimal += k;
            c.judged += n;
        }
    }

    let mut report = Report::default();
    for ((agent, game), c) in &cells {
        let props = c.overall.proportions();
        for (i, &label) in ReasoningLabel::ALL.iter().enumerate() {
            report.distribution.push(DistributionRow {
                agent: agent.clone(),
                game: game.clone(),
                label,
                count: c.overall.count(label),
                proportion: props[i],
            });
        }
        for (&bin, d) in &c.by_bin {
            let props = d.proportions();
            for (i, &label) in ReasoningLabel::ALL.iter().enumerate() {
                report.turn_bins.push(TurnBinRow {
                    agent: agent.clone(),
                    game: game.clone(),
                    bin,
                    label,
                    proportion: props[i],
                });
            }
        }
        let summary = metric_summary(&c.rewards).ok();
        let ci = bootstrap_ci(&c.rewards, opts.resamples, opts.alpha, opts.bootstrap_seed).ok();
        report.metrics.push(MetricsRow {
            agent: agent.clone(),
            game: game.clone(),
            mean_reward: summary.map(|s| s.mean),
            stderr: summary.map(|s| s.stderr),
            max_cum_reward: summary.map(|s| s.max),
            ci_lo: ci.map(|c| c.0),
            ci_hi: ci.map(|c| c.1),
            illegal_rate: ratio(c.illegal, c.moves),
            optimality: (c.judged > 0).then(|| ratio(c.optimal, c.judged)),
            mean_reasoning_len: ratio(c.words, c.moves),
        });
    }

    let games: BTreeSet<&String> = cells.keys().map(|(_, g)| g).collect();
    for game in games {
        for ((agent, g), c) in &cells {
            if g != game {
                continue;
            }
            for (&bin, d) in &c.by_bin {
                report.entropy.push(EntropyRow {
                    game: game.clone(),
                    agent_scope: agent.clone(),
                    bin,
                    entropy_bits: entropy_bits(&d.proportions()),
                });
            }
        }
        for ((g, bin), d) in &pooled {
            if g == game {
                report.entropy.push(EntropyRow {
                    game: game.clone(),
                    agent_scope: POOLED.into(),
                    bin: *bin,
                    entropy_bits: entropy_bits(&d.proportions()),
                });
            }
        }
    }
    Ok(report)
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn fixed(x: f64) -> String {
    // Avoid printing "-0.000000".
    let s = format!("{x:.6}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fixed).unwrap_or_default()
}

pub const REPORT_FILES: [&str; 4] = ["distribution_by_game.csv", "turn_bins.csv", "entropy.csv", "metrics.csv"];

impl Report {
    pub fn write(&self, out_dir: &Path) -> Result<Vec<PathBuf>, AnalysisError> {
        std::fs::create_dir_all(out_dir).map_err(|e| AnalysisError::Io(e.to_string()))?;
        let paths: Vec<PathBuf> = REPORT_FILES.iter().map(|f| out_dir.join(f)).collect();

        let mut w = writer(&paths[0])?;
        row(&mut w, ["agent", "game", "label", "count", "proportion"])?;
        for r in &self.distribution {
            row(
                &mut w,
                [&r.agent, &r.game, r.label.as_str(), &r.count.to_string(), &fixed(r.proportion)],
            )?;
        }
        finish(w)?;

        let mut w = writer(&paths[1])?;
        row(&mut w, ["agent", "game", "bin", "label", "proportion"])?;
        for r in &self.turn_bins {
            row(
                &mut w,
                [&r.agent, &r.game, &r.bin.to_string(), r.label.as_str(), &fixed(r.proportion)],
            )?;
        }
        finish(w)?;

        let mut w = writer(&paths[2])?;
        row(&mut w, ["game", "agent_scope", "bin", "entropy_bits"])?;
        for r in &self.entropy {
            row(&mut w, [&r.game, &r.agent_scope, &r.bin.to_string(), &fixed(r.entropy_bits)])?;
        }
        finish(w)?;

        let mut w = writer(&paths[3])?;
        row(
            &mut w,
            [
                "agent",
                "game",
                "mean_reward",
                "stderr",
                "max_cum_reward",
                "ci_lo",
                "ci_hi",
                "illegal_rate",
                "optimality",
                "mean_reasoning_len",
            ],
        )?;
        for r in &self.metrics {
            row(
                &mut w,
                [
                    r.agent.clone(),
                    r.game.clone(),
                    opt(r.mean_reward),
                    opt(r.stderr),
                    opt(r.max_cum_reward),
                    opt(r.ci_lo),
                    opt(r.ci_hi),
                    fixed(r.illegal_rate),
                    opt(r.optimality),
                    fixed(r.mean_reasoning_len),
                ],
            )?;
        }
        finish(w)?;
        Ok(paths)
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, AnalysisError> {
    csv::Writer::from_path(path).map_err(|e| AnalysisError::Io(e.to_string()))
}

fn row<I, S>(w: &mut csv::Writer<std::fs::File>, fields: I) -> Result<(), AnalysisError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(fields).map_err(|e| AnalysisError::Io(e.to_string()))
}

fn finish(mut w: csv::Writer<std::fs::File>) -> Result<(), AnalysisError> {
    w.flush().map_err(|e| AnalysisError::Io(e.to_string()))
}

/// Builds the report for `run_id` and writes the four CSV files.
pub fn emit_report(
    store: &TraceStore,
    run_id: &str,
    out_dir: &Path,
    opts: &ReportOptions,
) -> Result<(Report, Vec<PathBuf>), AnalysisError> {
    let report = build_report(store, run_id, opts)?;
    let files = report.write(out_dir)?;
    Ok((report, files))
}
