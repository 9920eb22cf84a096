#![no_main]

use libfuzzer_sys::fuzz_target;
use nbp_core::frostman::{read_tree_csv, write_tree_csv};

fuzz_target!(|data: &[u8]| {
    let Some((&m, rest)) = data.split_first() else { return };
    let Ok(t) = read_tree_csv(rest, usize::from(m % 8) + 1) else { return };
    let mut out = Vec::new();
    write_tree_csv(&t, &mut out).expect("write");
    let back = read_tree_csv(out.as_slice(), t.alphabet_size()).expect("reread");
    assert_eq!(back.leaves(), t.leaves());
});
