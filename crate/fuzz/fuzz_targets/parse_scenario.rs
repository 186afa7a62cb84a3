#![no_main]

use libfuzzer_sys::fuzz_target;
use mhdiff_core::scenario::parse_scenario;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(file) = parse_scenario(text) {
            let _ = file.validate();
        }
    }
});
