#![no_main]

use freeholo::realize::Realization;
use freeholo::{Complex64, GradedPoint};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(r) = serde_json::from_slice::<Realization>(data) else { return };
    let d = r.delta().d();
    if d == 0 || d > 8 {
        return;
    }
    // The origin may sit outside the domain; only errors are acceptable, not panics.
    let x = GradedPoint::scalar(&vec![Complex64::new(0.0, 0.0); d]).expect("scalar point");
    let _ = r.eval_direct(&x);
    let _ = r.eval_neumann(&x, 1e-8);
});
