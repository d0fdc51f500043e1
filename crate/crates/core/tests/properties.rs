use std::collections::BTreeMap;

use arena_core::agents::AgentDescriptor;
use arena_core::analysis::{
    bin_index, bootstrap_ci, classify_reasoning, entropy_bits, metric_summary, Lexicon, ReasoningDistribution,
    ReasoningLabel,
};
use arena_core::backends::parse_decision;
use arena_core::engine::{default_registry, ActionId, GameSpec, JointAction};
use arena_core::runner::{EpisodeRecord, EpisodeStatus, IllegalPolicy, MoveRecord, RunConfig};
use arena_core::seed::{derive_seed, stream_rng};
use arena_core::tracestore::{MoveFilter, TraceStore};
use proptest::prelude::*;
use rand::Rng;

fn game_spec() -> impl Strategy<Value = GameSpec> {
    prop_oneof![
        Just(GameSpec::new("tic_tac_toe")),
        Just(GameSpec::new("connect_four")),
        Just(GameSpec::new("kuhn_poker")),
        (1u32..6).prop_map(|r| GameSpec::new("matrix_pd").with_param("rounds", r)),
        (1u32..6).prop_map(|r| GameSpec::new("matching_pennies").with_param("rounds", r)),
        (1u32..6).prop_map(|r| GameSpec::new("rock_paper_scissors").with_param("rounds", r)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn legal_play_terminates_within_bounds(spec in game_spec(), seed in any::<u64>(), picks in prop::collection::vec(any::<u16>(), 64)) {
        let game = default_registry().create(&spec).unwrap();
        let meta = game.metadata();
        // A Kuhn hand can pay out the opponent's whole stake.
        let (lo, hi) = if spec.name == "kuhn_poker" { (-2.0, 2.0) } else { game.forfeit_payoffs() };
        let mut state = default_registry().reset(&spec, seed).unwrap();
        let mut total: BTreeMap<usize, f64> = BTreeMap::new();
        let mut picks = picks.into_iter().cycle();
        let mut steps = 0;
        while !state.is_terminal() {
            prop_assert!(steps < meta.max_turns, "exceeded {} turns", meta.max_turns);
            let movers = state.to_move().to_vec();
            prop_assert!(!movers.is_empty());
            prop_assert!(meta.simultaneous || movers.len() == 1);
            let mut joint = JointAction::new();
            for p in movers {
                let legal = state.legal_actions(p).unwrap();
                prop_assert!(!legal.is_empty());
                joint.insert(p, legal[picks.next().unwrap() as usize % legal.len()]);
            }
            let step = state.apply(&joint).unwrap();
            for (p, r) in &step.rewards {
                prop_assert!(*r >= lo && *r <= hi, "step reward {} outside [{}, {}]", r, lo, hi);
                *total.entry(*p).or_default() += r;
            }
            prop_assert_eq!(step.state.turn(), state.turn() + 1);
            state = step.state;
            steps += 1;
        }
        for (p, r) in state.returns() {
            prop_assert!((total.get(p).copied().unwrap_or(0.0) - r).abs() < 1e-9);
        }
        if game.zero_sum() {
            prop_assert!(state.returns().values().sum::<f64>().abs() < 1e-9);
        }
        prop_assert!(state.apply(&JointAction::new()).is_err());
    }

    #[test]
    fn reset_is_deterministic(spec in game_spec(), seed in any::<u64>()) {
        let a = default_registry().reset(&spec, seed).unwrap();
        let b = default_registry().reset(&spec, seed).unwrap();
        prop_assert_eq!(a.payload(), b.payload());
        prop_assert_eq!(a.state_string(0), b.state_string(0));
    }

    #[test]
    fn parser_never_returns_an_illegal_action(raw in ".{0,120}", legal in prop::collection::btree_set(0u32..12, 0..12)) {
        let legal: Vec<ActionId> = legal.into_iter().map(ActionId).collect();
        if let Ok(d) = parse_decision(&raw, &legal) {
            prop_assert!(legal.contains(&d.action));
        }
    }

    #[test]
    fn parser_accepts_strict_json(reasoning in "[a-zA-Z .,!]{0,60}", action in 0u32..9) {
        let legal: Vec<ActionId> = (0..9).map(ActionId).collect();
        let raw = serde_json::json!({"reasoning": reasoning, "action": action}).to_string();
        let d = parse_decision(&raw, &legal).unwrap();
        prop_assert_eq!(d.action, ActionId(action));
        prop_assert_eq!(d.reasoning, reasoning);
    }

    #[test]
    fn classification_is_consistent(text in "[a-z ]{0,200}") {
        let c = classify_reasoning(&text, &Lexicon::default());
        if c.counts.is_empty() {
            prop_assert_eq!(c.label, ReasoningLabel::Uncategorized);
        } else {
            let max = *c.counts.values().max().unwrap();
            prop_assert_eq!(c.counts[&c.label], max);
            let first = ReasoningLabel::CUED.iter().find(|l| c.counts.get(l) == Some(&max)).unwrap();
            prop_assert_eq!(c.label, *first);
        }
    }

    #[test]
    fn proportions_form_a_distribution(labels in prop::collection::vec(0usize..8, 1..200)) {
        let mut d = ReasoningDistribution::default();
        for &l in &labels {
            d.add(ReasoningLabel::ALL[l]);
        }
        prop_assert_eq!(d.total(), labels.len());
        let p = d.proportions();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let h = entropy_bits(&p);
        prop_assert!((-1e-12..=3.0 + 1e-12).contains(&h), "entropy {}", h);
    }

    #[test]
    fn bootstrap_interval_brackets_symmetric_mean(half in prop::collection::vec(-100.0f64..100.0, 1..30), seed in any::<u64>()) {
        let mut values = half.clone();
        values.extend(half.iter().map(|v| -v));
        let mean = metric_summary(&values).unwrap().mean;
        let (lo, hi) = bootstrap_ci(&values, 400, 0.05, seed).unwrap();
        prop_assert!(lo <= hi);
        prop_assert!(lo <= mean + 1e-9 && mean - 1e-9 <= hi, "{} not in [{}, {}]", mean, lo, hi);
        prop_assert_eq!(bootstrap_ci(&values, 400, 0.05, seed).unwrap(), (lo, hi));
    }

    #[test]
    fn bins_stay_in_range(max_turn in 0u32..500, turn_frac in 0.0f64..=1.0, bins in 1u32..20) {
        let turn = (max_turn as f64 * turn_frac) as u32;
        let b = bin_index(turn, max_turn, bins);
        prop_assert!(b < bins);
        prop_assert!(bin_index(max_turn, max_turn, bins) >= b);
    }

    #[test]
    fn seed_streams_are_deterministic(seed in any::<u64>(), stream in any::<u64>()) {
        prop_assert_eq!(derive_seed(seed, stream), derive_seed(seed, stream));
        let a: Vec<u64> = (0..4).map({ let mut r = stream_rng(seed, stream); move |_| r.random() }).collect();
        let b: Vec<u64> = (0..4).map({ let mut r = stream_rng(seed, stream); move |_| r.random() }).collect();
        prop_assert_eq!(a, b);
    }
}

fn move_record() -> impl Strategy<Value = MoveRecord> {
    (
        0u32..50,
        0usize..2,
        -1i64..9,
        ".{0,40}",
        ".{0,80}",
        ".{0,80}",
        prop::collection::vec(0u32..9, 0..9),
        any::<(bool, bool)>(),
        0.0f64..1e6,
    )
        .prop_map(|(turn, player, action, reasoning, prompt, raw, legal, (illegal, fallback), latency)| MoveRecord {
            episode_id: 0,
            turn,
            player,
            action,
            reasoning,
            prompt,
            raw_response: raw,
            legal_actions: legal.into_iter().map(ActionId).collect(),
            illegal,
            fallback_used: fallback,
            latency_ms: latency,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn store_round_trips(
        seed in any::<u64>(),
        rewards in prop::collection::vec(-1e6f64..1e6, 2),
        winner in prop::option::of(0usize..2),
        status in 0usize..3,
        moves in prop::collection::vec(move_record(), 0..12),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let mut store = TraceStore::open(dir.path().join("t.db")).unwrap();
        let config = RunConfig {
            run_id: Some("r".into()),
            games: vec![GameSpec::new("tic_tac_toe")],
            episodes_per_game: 1,
            base_seed: 0,
            policies: BTreeMap::from([(0, AgentDescriptor::random()), (1, AgentDescriptor::random())]),
            parallelism: 1,
            on_illegal: IllegalPolicy::RandomFallback,
            output: "t.db".into(),
        };
        store.insert_run("r", "2026-01-01T00:00:00Z", &serde_json::to_string(&config).unwrap()).unwrap();
        let id = store.next_episode_id().unwrap();
        let mut moves = moves;
        moves.sort_by_key(|m| (m.turn, m.player));
        moves.dedup_by_key(|m| (m.turn, m.player));
        for m in &mut moves {
            m.episode_id = id;
        }
        let status = [EpisodeStatus::Completed, EpisodeStatus::Forfeited, EpisodeStatus::Aborted][status];
        let episode = EpisodeRecord {
            episode_id: id,
            run_id: "r".into(),
            game: "tic_tac_toe".into(),
            seed,
            rewards: rewards.iter().copied().enumerate().collect(),
            winner,
            num_turns: moves.iter().map(|m| m.turn).collect::<std::collections::BTreeSet<_>>().len() as u32,
            status,
        };
        store.write_episode(&episode, &moves).unwrap();
        prop_assert_eq!(store.episodes(Some("r")).unwrap(), vec![episode]);
        let back: Vec<MoveRecord> = store.query_moves(&MoveFilter::run("r")).unwrap().into_iter().map(|r| r.record).collect();
        prop_assert_eq!(back, moves);
    }
}
