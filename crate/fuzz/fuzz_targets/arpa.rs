#![no_main]

use libfuzzer_sys::fuzz_target;
use fusebeam_core::scoring::NGramLm;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = NGramLm::from_arpa(text);
    }
});
