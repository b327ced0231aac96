#![cfg_attr(all(fuzzing, not(windows)), no_main)]

use libfuzzer_sys::fuzz_target;
use shiftcompact::DiscreteMeasure;

// An accepted measure must round-trip through its own JSON form.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(m) = DiscreteMeasure::from_json_str(s) {
        let text = serde_json::to_string(&m.to_json()).unwrap();
        let back = DiscreteMeasure::from_json_str(&text).unwrap();
        assert_eq!(back.weights(), m.weights());
        assert!(m.total_mass() <= 1.0 + 1e-9);
    }
});

#[cfg(not(fuzzing))]
fn main() {}
