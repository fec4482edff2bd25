#![no_main]

use freeholo::model::{model_residual, ModelSampleSet};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(set) = serde_json::from_slice::<ModelSampleSet>(data) else { return };
    if set.validate().is_ok() {
        let _ = model_residual(&set);
    }
});
