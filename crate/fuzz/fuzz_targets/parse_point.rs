#![no_main]

use libfuzzer_sys::fuzz_target;
use nbp_core::systems::{format_word, parse_word, CirclePoint, SymbolicPoint};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(x) = text.parse::<SymbolicPoint>() {
        let y: SymbolicPoint = x.to_string().parse().expect("display parses");
        assert_eq!(x.prefix(64), y.prefix(64));
    }
    if let Ok(x) = text.parse::<CirclePoint>() {
        assert_eq!(x.to_string().parse::<CirclePoint>().expect("display parses"), x);
    }
    if let Ok(w) = parse_word(text) {
        assert_eq!(parse_word(&format_word(&w)).expect("formatted word parses"), w);
    }
});
