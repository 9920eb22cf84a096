#![no_main]

use libfuzzer_sys::fuzz_target;
use nbp_core::config::{Config, MeasureKindConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = Config::parse(text) else { return };
    // a parsed config must survive its own serialization
    let again = Config::parse(&config.to_toml()).expect("round trip");
    assert_eq!(again, config);
    let Ok(sys) = config.build_system() else { return };
    let _ = config.build_potential(&sys);
    let _ = config.build_target();
    // tree measures name files on disk; leave those alone
    if config.measure.as_ref().is_some_and(|m| m.kind != MeasureKindConfig::FrostmanTree) {
        let _ = config.build_measure(&sys, None);
    }
});
