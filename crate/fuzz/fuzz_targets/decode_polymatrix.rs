#![no_main]

use freeholo::PolyMatrix;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = serde_json::from_slice::<PolyMatrix>(data) {
        let text = serde_json::to_string(&v).expect("decoded values serialize");
        let back: PolyMatrix = serde_json::from_str(&text).expect("serialized values decode");
        assert_eq!(back, v);
    }
});
