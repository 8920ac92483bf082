#![no_main]

use libfuzzer_sys::fuzz_target;
use fusebeam_core::frontend::NormalizationStats;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = NormalizationStats::from_json(text);
    }
});
