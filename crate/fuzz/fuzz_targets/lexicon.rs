#![no_main]

use arena_core::analysis::{classify_reasoning, Lexicon};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(lexicon) = Lexicon::from_json(text) {
        classify_reasoning("take the center square to block the fork", &lexicon);
    }
});
