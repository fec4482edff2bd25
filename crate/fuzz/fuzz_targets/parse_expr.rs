#![no_main]

use freeholo::expr::{parse, print};
use libfuzzer_sys::fuzz_target;

// First byte picks d, the rest is the source text.
fuzz_target!(|data: &[u8]| {
    let Some((&first, rest)) = data.split_first() else { return };
    let d = 1 + usize::from(first % 3);
    let Ok(src) = std::str::from_utf8(rest) else { return };
    if let Ok(ast) = parse(src, d) {
        let again = parse(&print(&ast), d).expect("printed expression must parse");
        assert_eq!(print(&again), print(&ast));
    }
});
