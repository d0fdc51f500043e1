#![no_main]

use arena_core::agents::parse_console_line;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_console_line(&String::from_utf8_lossy(data));
});
