#![cfg_attr(all(fuzzing, not(windows)), no_main)]

use libfuzzer_sys::fuzz_target;
use shiftcompact::family::lambda_measure;
use shiftcompact::{DiscreteMeasure, GridSpec, TestFunctionSpec};

// A validated test function evaluates to a finite value in [0, mass^k].
fuzz_target!(|data: &[u8]| {
    let Ok(f) = serde_json::from_slice::<TestFunctionSpec>(data) else {
        return;
    };
    if f.validate().is_err() || f.k > 6 || f.scales.iter().any(|s| !(1e-3..=1e3).contains(s)) {
        return;
    }
    let g = GridSpec::centered(f.dim(), 2, 0.5).unwrap();
    let n = g.len();
    let m = DiscreteMeasure::new(g, vec![0.5 / n as f64; n]).unwrap();
    if let Ok(v) = lambda_measure(&f, &m) {
        assert!(v.is_finite() && v >= 0.0);
    }
});

#[cfg(not(fuzzing))]
fn main() {}
