#![no_main]

use libfuzzer_sys::fuzz_target;
use nbp_core::harness::parse_estimate_json;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_estimate_json(text);
    }
});
