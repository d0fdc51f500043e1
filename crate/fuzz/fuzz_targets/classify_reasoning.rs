#![no_main]

use arena_core::analysis::{classify_reasoning, Lexicon};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let c = classify_reasoning(&text, &Lexicon::default());
    assert!(c.counts.values().all(|&n| n > 0));
});
