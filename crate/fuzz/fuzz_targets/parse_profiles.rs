#![no_main]

use libfuzzer_sys::fuzz_target;
use mhdiff_core::io::parse_profiles;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = parse_profiles(text) {
            let _ = model.composite_variances(0.95);
        }
    }
});
