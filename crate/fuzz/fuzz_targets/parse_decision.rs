#![no_main]

use arena_core::backends::parse_decision;
use arena_core::engine::ActionId;
use libfuzzer_sys::fuzz_target;

// First byte picks the legal set as a bitmask over actions 0..8.
fuzz_target!(|data: &[u8]| {
    let Some((&mask, rest)) = data.split_first() else { return };
    let legal: Vec<ActionId> = (0..8).filter(|i| mask & (1 << i) != 0).map(ActionId).collect();
    let raw = String::from_utf8_lossy(rest);
    if let Ok(d) = parse_decision(&raw, &legal) {
        assert!(legal.contains(&d.action));
    }
});
