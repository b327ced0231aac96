#![cfg_attr(all(fuzzing, not(windows)), no_main)]

use std::str::FromStr;

use libfuzzer_sys::fuzz_target;
use shiftcompact_cli::reproduce::Manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = Manifest::from_str(s);
    }
});

#[cfg(not(fuzzing))]
fn main() {}
