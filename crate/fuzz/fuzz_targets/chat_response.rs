#![no_main]

use arena_core::backends::ChatCompletionResponse;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = ChatCompletionResponse::decode(&String::from_utf8_lossy(data));
});
