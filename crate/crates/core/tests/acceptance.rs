//! Acceptance checks. Runs as a plain binary so each criterion reports one
//! PASS/FAIL line; exits nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use arena_core::agents::{build_agent, Agent, AgentDescriptor, NoHumans};
use arena_core::analysis::{
    bootstrap_ci, classify_reasoning, emit_report, entropy_bits, metric_summary, minimax_optimal_actions, Lexicon,
    ReasoningLabel, ReportOptions,
};
use arena_core::backends::{parse_decision, BackendPool, BackendRef, ParseFailure};
use arena_core::engine::{reset, ActionId, Card, GameSpec, GameState, Payload};
use arena_core::prompts::{build_observation, game_prompt, wrap_prompt, WRAPPER};
use arena_core::runner::{run_batch, run_episode, IllegalPolicy, NoObserver, RunConfig};
use arena_core::tracestore::{MoveFilter, TraceStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn data(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------------------
// Tic-tac-toe reference: own board, own rules, no shared code with the engine.

type Board = [u8; 9];

const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

fn line_owner(b: &Board) -> u8 {
    LINES
        .iter()
        .find(|l| b[l[0]] != 0 && b[l[0]] == b[l[1]] && b[l[1]] == b[l[2]])
        .map_or(0, |l| b[l[0]])
}

fn full(b: &Board) -> bool {
    b.iter().all(|&c| c != 0)
}

fn done(b: &Board) -> bool {
    line_owner(b) != 0 || full(b)
}

fn count_sequences(b: &mut Board, mover: u8) -> u64 {
    if done(b) {
        return 1;
    }
    let mut n = 0;
    for i in 0..9 {
        if b[i] == 0 {
            b[i] = mover;
            n += count_sequences(b, 3 - mover);
            b[i] = 0;
        }
    }
    n
}

/// Plain negamax: value for `mover` of a non-terminal board.
fn negamax(b: &mut Board, mover: u8) -> i8 {
    let mut best = -2;
    for i in 0..9 {
        if b[i] == 0 {
            b[i] = mover;
            let v = if line_owner(b) == mover {
                1
            } else if full(b) {
                0
            } else {
                -negamax(b, 3 - mover)
            };
            b[i] = 0;
            best = best.max(v);
        }
    }
    best
}

fn best_moves(b: &Board, mover: u8) -> (i8, Vec<u32>) {
    let mut scored = Vec::new();
    for i in 0..9 {
        if b[i] == 0 {
            let mut next = *b;
            next[i] = mover;
            let v = if line_owner(&next) == mover {
                1
            } else if full(&next) {
                0
            } else {
                -negamax(&mut next, 3 - mover)
            };
            scored.push((i as u32, v));
        }
    }
    let best = scored.iter().map(|s| s.1).max().unwrap();
    (best, scored.into_iter().filter(|s| s.1 == best).map(|s| s.0).collect())
}

fn reachable(b: &mut Board, mover: u8, path: &mut Vec<u32>, out: &mut HashMap<Board, Vec<u32>>) {
    if done(b) || out.contains_key(b) {
        return;
    }
    out.insert(*b, path.clone());
    for i in 0..9 {
        if b[i] == 0 {
            b[i] = mover;
            path.push(i as u32);
            reachable(b, 3 - mover, path, out);
            path.pop();
            b[i] = 0;
        }
    }
}

fn replay(spec: &GameSpec, seed: u64, actions: &[u32]) -> GameState {
    let mut s = reset(spec, seed).unwrap();
    for &a in actions {
        let p = s.to_move()[0];
        s = s.apply_single(p, ActionId(a)).unwrap().state;
    }
    s
}

fn ttt_oracle() -> Outcome {
    let start = Instant::now();
    let mut empty = [0u8; 9];
    let sequences = count_sequences(&mut empty, 1);
    ensure!(sequences == 255_168, "terminal sequences {sequences}");
    let value = negamax(&mut empty, 1);
    ensure!(value == 0, "empty-board value {value}");

    let mut states = HashMap::new();
    reachable(&mut empty, 1, &mut Vec::new(), &mut states);
    ensure!(states.len() == 4520, "reachable non-terminal states {}", states.len());

    let spec = GameSpec::new("tic_tac_toe");
    for (board, path) in &states {
        let mover = if path.len() % 2 == 0 { 1 } else { 2 };
        let (v, moves) = best_moves(board, mover);
        let state = replay(&spec, 0, path);
        ensure!(!state.is_terminal(), "engine ended early after {path:?}");
        let (ev, emoves) = minimax_optimal_actions(&state).map_err(|e| e.to_string())?;
        let emoves: Vec<u32> = emoves.iter().map(|a| a.0).collect();
        ensure!((ev, &emoves) == (v, &moves), "after {path:?}: engine ({ev}, {emoves:?}) vs reference ({v}, {moves:?})");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("255168 sequences, value 0, 4520 states agree, {:.2}s", elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------------------
// Kuhn poker.

/// Chip accounting from scratch: ante 1 each, bet and call add 1, a fold
/// forfeits the folder's stake, showdown goes to the higher card.
fn kuhn_reference(cards: [Card; 2], history: &[u32]) -> Option<[f64; 2]> {
    let mut stake = [1.0, 1.0];
    let mut facing = false;
    let mut called = false;
    for (i, &a) in history.iter().enumerate() {
        let p = i % 2;
        match (facing, a) {
            (false, 0) => {}
            (false, _) => {
                stake[p] += 1.0;
                facing = true;
            }
            (true, 0) => {
                let mut r = [stake[p]; 2];
                r[p] = -stake[p];
                return Some(r);
            }
            (true, _) => {
                stake[p] += 1.0;
                called = true;
            }
        }
    }
    if !(called || history == [0, 0]) {
        return None;
    }
    let w = if cards[0] > cards[1] { 0 } else { 1 };
    let mut r = [stake[1 - w]; 2];
    r[1 - w] = -stake[1 - w];
    Some(r)
}

fn kuhn_walk(state: &GameState, cards: [Card; 2], history: &mut Vec<u32>, terminals: &mut usize) -> Result<(), String> {
    if state.is_terminal() {
        *terminals += 1;
        let r = state.returns();
        let sum: f64 = r.values().sum();
        ensure!(sum == 0.0, "{cards:?} {history:?}: rewards sum {sum}");
        let expected = kuhn_reference(cards, history).ok_or(format!("{history:?} should not be terminal"))?;
        ensure!(r[&0] == expected[0] && r[&1] == expected[1], "{cards:?} {history:?}: {r:?} vs {expected:?}");
        return Ok(());
    }
    ensure!(kuhn_reference(cards, history).is_none(), "{history:?} should be terminal");
    let p = state.to_move()[0];
    let legal = state.legal_actions(p).map_err(|e| e.to_string())?;
    ensure!(legal == [ActionId(0), ActionId(1)], "legal {legal:?}");
    for a in legal {
        history.push(a.0);
        let next = state.apply_single(p, a).map_err(|e| e.to_string())?.state;
        kuhn_walk(&next, cards, history, terminals)?;
        history.pop();
    }
    Ok(())
}

fn kuhn_exhaustive() -> Outcome {
    let spec = GameSpec::new("kuhn_poker");
    let mut deals: BTreeMap<[Card; 2], u64> = BTreeMap::new();
    for seed in 0..10_000 {
        if let Payload::Kuhn(h) = reset(&spec, seed).unwrap().payload() {
            deals.entry(h.cards).or_insert(seed);
        }
        if deals.len() == 6 {
            break;
        }
    }
    ensure!(deals.len() == 6, "found {} deals", deals.len());
    let mut terminals = 0;
    for (&cards, &seed) in &deals {
        ensure!(cards[0] != cards[1], "duplicate cards {cards:?}");
        kuhn_walk(&reset(&spec, seed).unwrap(), cards, &mut Vec::new(), &mut terminals)?;
    }
    ensure!(terminals == 30, "{terminals} terminal histories");

    let state = reset(&spec, deals.values().next().copied().unwrap()).unwrap();
    let prompt = build_observation(&state, 0).map_err(|e| e.to_string())?.prompt;
    for needle in [
        "Total pot size: 2 chips",
        "Your contribution: 1 chips",
        "0: Check (stay in the game without betting)",
        "1: Bet (add a chip to the pot)",
    ] {
        ensure!(prompt.contains(needle), "prompt lacks {needle:?}:\n{prompt}");
    }
    Ok("6 deals, 30 terminals, zero-sum, chips match, prompt fields present".into())
}

// ---------------------------------------------------------------------------
// Reproducibility.

fn dump(path: &Path) -> Vec<String> {
    let conn = rusqlite::Connection::open(path).unwrap();
    let mut tables: Vec<String> = conn
        .prepare("SELECT name FROM sqlite_master WHERE type = 'table' ORDER BY name")
        .unwrap()
        .query_map([], |r| r.get(0))
        .unwrap()
        .map(Result::unwrap)
        .collect();
    tables.retain(|t| !t.starts_with("sqlite_"));
    let mut out = Vec::new();
    let version: i64 = conn.query_row("PRAGMA user_version", [], |r| r.get(0)).unwrap();
    out.push(format!("user_version={version}"));
    for t in tables {
        let mut stmt = conn.prepare(&format!("SELECT * FROM {t} ORDER BY rowid")).unwrap();
        let names: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
        let rows = stmt
            .query_map([], |r| {
                let mut line = format!("{t}:");
                for (i, name) in names.iter().enumerate() {
                    if name == "created_at" || name == "latency_ms" {
                        continue;
                    }
                    let v: rusqlite::types::Value = r.get(i)?;
                    line.push_str(&format!(" {name}={v:?}"));
                }
                Ok(line)
            })
            .unwrap();
        out.extend(rows.map(Result::unwrap));
    }
    out
}

fn repro_config(output: &Path, games: Value, episodes: u32) -> RunConfig {
    let script = [
        r#"{"reasoning": "Take the center square.", "action": 4}"#,
        "I will play 1",
        r#"{"action": 42}"#,
        "no idea",
        r#"{'reasoning': 'corner', 'action': 0}"#,
    ];
    let body = json!({
        "games": games,
        "episodes_per_game": episodes,
        "base_seed": 7,
        "policies": {
            "0": {"kind": "llm", "model": "mock", "backend": {"kind": "scripted_mock", "responses": script}},
            "1": {"kind": "random"}
        },
        "output": output,
    });
    RunConfig::from_json(&body.to_string()).unwrap()
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let db = dir.path().join("repro.db");
    let games = json!([
        "tic_tac_toe",
        "connect_four",
        "kuhn_poker",
        {"name": "matrix_pd", "params": {"rounds": 3}},
        "matching_pennies",
        {"name": "rock_paper_scissors", "params": {"rounds": 2}}
    ]);
    let mut dumps = Vec::new();
    for parallelism in [1, 8, 1, 8] {
        let _ = std::fs::remove_file(&db);
        let mut config = repro_config(&db, games.clone(), 12);
        config.parallelism = parallelism;
        let summary = run_batch(&config, &NoHumans).map_err(|e| e.to_string())?;
        ensure!(summary.all_finished(), "unfinished episodes: {summary:?}");
        ensure!(summary.fallback_moves > 0, "script never exercised the fallback");
        dumps.push(dump(&db));
    }
    for (i, d) in dumps.iter().enumerate().skip(1) {
        if d != &dumps[0] {
            let diff = d.iter().zip(&dumps[0]).find(|(a, b)| a != b);
            return Err(format!("run {i} differs ({} vs {} rows), first: {diff:?}", d.len(), dumps[0].len()));
        }
    }

    let _ = std::fs::remove_file(&db);
    let mut config = repro_config(&db, json!(["tic_tac_toe"]), 1000);
    config.parallelism = 4;
    let start = Instant::now();
    let summary = run_batch(&config, &NoHumans).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(summary.completed + summary.forfeited == 1000, "{summary:?}");
    ensure!(elapsed < Duration::from_secs(30), "1000 episodes took {elapsed:?}");
    Ok(format!(
        "{} rows identical over 4 runs (parallelism 1/8); 1000 episodes in {:.2}s",
        dumps[0].len(),
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------
// Random vs random first-player wins.

/// Probability that X wins from `b` when both sides pick uniformly.
fn x_win_probability(b: &mut Board, mover: u8, memo: &mut HashMap<Board, f64>) -> f64 {
    match line_owner(b) {
        1 => return 1.0,
        2 => return 0.0,
        _ if full(b) => return 0.0,
        _ => {}
    }
    if let Some(&p) = memo.get(b) {
        return p;
    }
    let empty: Vec<usize> = (0..9).filter(|&i| b[i] == 0).collect();
    let mut p = 0.0;
    for &i in &empty {
        b[i] = mover;
        p += x_win_probability(b, 3 - mover, memo);
        b[i] = 0;
    }
    p /= empty.len() as f64;
    memo.insert(*b, p);
    p
}

fn random_vs_random() -> Outcome {
    let exact = x_win_probability(&mut [0; 9], 1, &mut HashMap::new());
    let n = 20_000u64;
    let base = 1_000_000u64;
    let spec = GameSpec::new("tic_tac_toe");
    let pool = BackendPool::new();
    let mut wins = 0u64;
    for i in 0..n {
        let mut agents: BTreeMap<usize, Box<dyn Agent>> = (0..2)
            .map(|p| (p, build_agent(&AgentDescriptor::random(), &pool).unwrap()))
            .collect();
        let run = run_episode(&spec, &mut agents, base + i, IllegalPolicy::RandomFallback, "rr", i as i64, &mut NoObserver)
            .map_err(|e| e.to_string())?;
        if run.record.winner == Some(0) {
            wins += 1;
        }
    }
    let freq = wins as f64 / n as f64;
    let se = (exact * (1.0 - exact) / n as f64).sqrt();
    let z = (freq - exact) / se;
    ensure!(z.abs() <= 3.0, "observed {freq:.5} vs exact {exact:.5} (z = {z:.2})");
    Ok(format!("observed {freq:.5}, exact {exact:.5}, z = {z:.2}, n = {n}"))
}

// ---------------------------------------------------------------------------
// Parser.

fn parser_corpus() -> Outcome {
    let cases: Vec<Value> = serde_json::from_str(&data("parser_corpus.json")).map_err(|e| e.to_string())?;
    ensure!(cases.len() >= 25, "only {} cases", cases.len());
    for c in &cases {
        let name = c["name"].as_str().unwrap();
        let raw = c["raw"].as_str().unwrap();
        let legal: Vec<ActionId> = c["legal"].as_array().unwrap().iter().map(|v| ActionId(v.as_u64().unwrap() as u32)).collect();
        let got = parse_decision(raw, &legal);
        match c["error"].as_str() {
            None => {
                let d = got.map_err(|e| format!("{name}: {e}"))?;
                let action = c["action"].as_u64().unwrap() as u32;
                let reasoning = c["reasoning"].as_str().unwrap();
                ensure!(d.action == ActionId(action) && d.reasoning == reasoning, "{name}: got {d:?}");
            }
            Some("no_action") => ensure!(got == Err(ParseFailure::NoAction), "{name}: got {got:?}"),
            Some("illegal") => {
                let proposed = c["proposed"].as_i64().unwrap();
                ensure!(got == Err(ParseFailure::IllegalAction(proposed)), "{name}: got {got:?}");
            }
            Some(other) => return Err(format!("{name}: unknown expectation {other}")),
        }
    }

    const PIECES: [&str; 16] = [
        "{", "}", "\"action\"", "'action'", ":", " ", "\"reasoning\"", "\"", "'", "action: ", "```json\n", "```", ",", "-",
        "99999999999999999999", "\n",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut accepted = 0;
    for _ in 0..100_000 {
        let raw = if rng.random_bool(0.5) {
            let len = rng.random_range(0..96);
            let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            String::from_utf8_lossy(&bytes).into_owned()
        } else {
            let mut s = String::new();
            for _ in 0..rng.random_range(0..24) {
                if rng.random_bool(0.3) {
                    s.push_str(&rng.random_range(0..12).to_string());
                } else {
                    s.push_str(PIECES[rng.random_range(0..PIECES.len())]);
                }
            }
            s
        };
        let legal: Vec<ActionId> = (0..10u32).filter(|_| rng.random_bool(0.5)).map(ActionId).collect();
        let got = catch_unwind(AssertUnwindSafe(|| parse_decision(&raw, &legal))).map_err(|_| format!("panic on {raw:?}"))?;
        match got {
            Ok(d) => {
                ensure!(legal.contains(&d.action), "illegal action {:?} from {raw:?} with {legal:?}", d.action);
                accepted += 1;
            }
            Err(ParseFailure::IllegalAction(a)) => {
                ensure!(!(0..=u32::MAX as i64).contains(&a) || !legal.contains(&ActionId(a as u32)), "legal {a} reported illegal");
            }
            Err(ParseFailure::NoAction) => {}
        }
    }
    Ok(format!("{} corpus cases exact; 100000 fuzz inputs, {accepted} accepted, all legal", cases.len()))
}

// ---------------------------------------------------------------------------
// Classifier and entropy.

fn classifier_goldens() -> Outcome {
    let cases: Vec<Value> = serde_json::from_str(&data("classifier_goldens.json")).map_err(|e| e.to_string())?;
    ensure!(cases.len() >= 20, "only {} goldens", cases.len());
    let lexicon = Lexicon::default();
    for c in &cases {
        let text = c["text"].as_str().unwrap();
        let label: ReasoningLabel = c["label"].as_str().unwrap().parse().map_err(|e| format!("{e:?}"))?;
        let counts: BTreeMap<ReasoningLabel, usize> = c["counts"]
            .as_object()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.parse().unwrap(), v.as_u64().unwrap() as usize))
            .collect();
        let got = classify_reasoning(text, &lexicon);
        ensure!(got.label == label && got.counts == counts, "{text:?}: got {got:?}");
    }
    let h = [
        entropy_bits(&[1.0, 0.0, 0.0, 0.0]),
        entropy_bits(&[0.25; 4]),
        entropy_bits(&[0.75, 0.25]),
    ];
    ensure!(h[0] == 0.0, "unanimity {}", h[0]);
    ensure!((h[1] - 2.0).abs() < 1e-12, "uniform {}", h[1]);
    ensure!((h[2] - 0.8112781244591328).abs() < 1e-9, "[0.75,0.25] {}", h[2]);
    Ok(format!("{} goldens exact; entropies {:?}", cases.len(), h))
}

// ---------------------------------------------------------------------------
// Metrics.

fn metrics() -> Outcome {
    let s = metric_summary(&[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    ensure!(s.mean == 2.0, "mean {}", s.mean);
    ensure!((s.stderr - 0.57735).abs() < 1e-5, "stderr {}", s.stderr);
    let (lo, hi) = bootstrap_ci(&[4.5; 17], 1000, 0.05, 3).map_err(|e| e.to_string())?;
    ensure!(lo == 4.5 && hi == 4.5, "constant CI ({lo}, {hi})");
    let values: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
    let a = bootstrap_ci(&values, 2000, 0.05, 99).map_err(|e| e.to_string())?;
    let b = bootstrap_ci(&values, 2000, 0.05, 99).map_err(|e| e.to_string())?;
    ensure!(a.0.to_bits() == b.0.to_bits() && a.1.to_bits() == b.1.to_bits(), "{a:?} vs {b:?}");
    Ok(format!("mean 2, stderr {:.6}; constant CI point; seeded CI {a:?} repeats", s.stderr))
}

// ---------------------------------------------------------------------------
// End to end with scripted models.

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let db = dir.path().join("e2e.db");
    let x = ["I take the corner to start.", "Two in a row on top.", "Complete the top row to win."];
    let o = ["Block with the edge.", "Take the center square."];
    let reply = |r: &str, a: u32| json!({"reasoning": r, "action": a}).to_string();
    let xs: Vec<String> = x.iter().zip([0, 1, 2]).map(|(r, a)| reply(r, a)).collect();
    let os: Vec<String> = o.iter().zip([3, 4]).map(|(r, a)| reply(r, a)).collect();
    let config = RunConfig {
        run_id: Some("e2e".into()),
        games: vec![GameSpec::new("tic_tac_toe")],
        episodes_per_game: 1,
        base_seed: 5,
        policies: BTreeMap::from([
            (0, AgentDescriptor::llm("mock-x", BackendRef::scripted(xs))),
            (1, AgentDescriptor::llm("mock-o", BackendRef::scripted(os))),
        ]),
        parallelism: 1,
        on_illegal: IllegalPolicy::RandomFallback,
        output: db.clone(),
    };
    run_batch(&config, &NoHumans).map_err(|e| e.to_string())?;
    let store = TraceStore::open(&db).map_err(|e| e.to_string())?;
    let episodes = store.episodes(Some("e2e")).map_err(|e| e.to_string())?;
    ensure!(episodes.len() == 1 && episodes[0].winner == Some(0), "episodes {episodes:?}");
    let rows = store.query_moves(&MoveFilter::run("e2e")).map_err(|e| e.to_string())?;
    ensure!(rows.len() == 5, "{} moves", rows.len());

    let spec = GameSpec::new("tic_tac_toe");
    let mut state = reset(&spec, 5).unwrap();
    let reasons: Vec<&str> = [x[0], o[0], x[1], o[1], x[2]].to_vec();
    for (row, reason) in rows.iter().zip(reasons) {
        let m = &row.record;
        let expected = wrap_prompt(&game_prompt(&state, m.player).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure!(m.prompt == expected, "turn {} prompt differs", m.turn);
        ensure!(m.prompt.ends_with(WRAPPER), "turn {} prompt lacks the wrapper", m.turn);
        ensure!(m.reasoning == reason, "turn {} reasoning {:?}", m.turn, m.reasoning);
        ensure!(!m.illegal && !m.fallback_used, "turn {} flagged", m.turn);
        state = state.apply_single(m.player, ActionId(m.action as u32)).unwrap().state;
    }
    ensure!(state.is_terminal(), "replay did not finish");

    let out = dir.path().join("report");
    let (report, files) = emit_report(&store, "e2e", &out, &ReportOptions::default()).map_err(|e| e.to_string())?;
    ensure!(files.len() == 4 && files.iter().all(|f| f.exists()), "files {files:?}");
    let mut per_agent: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &report.distribution {
        *per_agent.entry(r.agent.as_str()).or_default() += r.count;
    }
    ensure!(per_agent == BTreeMap::from([("llm:mock-o", 2), ("llm:mock-x", 3)]), "distribution totals {per_agent:?}");
    let csv_total: usize = std::fs::read_to_string(out.join("distribution_by_game.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse::<usize>().unwrap())
        .sum();
    ensure!(csv_total == 5, "csv count total {csv_total}");
    let mut bin_sums: BTreeMap<(String, u32), f64> = BTreeMap::new();
    for r in &report.turn_bins {
        *bin_sums.entry((r.agent.clone(), r.bin)).or_default() += r.proportion;
    }
    ensure!(bin_sums.values().all(|s| (s - 1.0).abs() < 1e-9), "bin proportions {bin_sums:?}");
    let winner = report.metrics.iter().find(|m| m.agent == "llm:mock-x").ok_or("no metrics row for mock-x")?;
    ensure!(winner.mean_reward == Some(1.0) && winner.illegal_rate == 0.0, "metrics {winner:?}");
    let seen: BTreeSet<String> = report.metrics.iter().map(|m| m.agent.clone()).collect();
    ensure!(seen.contains("llm:mock-o"), "metrics agents {seen:?}");
    Ok("5 moves, prompts and reasoning exact, 4 CSVs consistent".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("engine_oracle_equivalence", ttt_oracle),
        ("kuhn_exhaustiveness", kuhn_exhaustive),
        ("reproducibility", reproducibility),
        ("random_vs_random_statistics", random_vs_random),
        ("parser_corpus_and_fuzz", parser_corpus),
        ("classifier_goldens_and_entropy", classifier_goldens),
        ("metrics", metrics),
        ("end_to_end_mock_run", end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(check).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", 8 - failed, 8);
    if failed > 0 {
        std::process::exit(1);
    }
}
