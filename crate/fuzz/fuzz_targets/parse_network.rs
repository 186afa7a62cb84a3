#![no_main]

use libfuzzer_sys::fuzz_target;
use mhdiff_core::io::parse_network;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(net) = parse_network(text) {
            let _ = net.index();
        }
    }
});
