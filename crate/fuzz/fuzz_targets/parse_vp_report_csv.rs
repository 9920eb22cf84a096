#![no_main]

use libfuzzer_sys::fuzz_target;
use nbp_core::harness::parse_vp_report_csv;

fuzz_target!(|data: &[u8]| {
    let _ = parse_vp_report_csv(data);
});
