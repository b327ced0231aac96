#![cfg_attr(all(fuzzing, not(windows)), no_main)]

use libfuzzer_sys::fuzz_target;
use shiftcompact::Collection;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(c) = Collection::from_json_str(s) {
        assert!(c.total_mass() <= 1.0 + 1e-9);
    }
});

#[cfg(not(fuzzing))]
fn main() {}
