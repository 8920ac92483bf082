#![no_main]

use libfuzzer_sys::fuzz_target;
use fusebeam_core::config::from_json_with_path;
use fusebeam_core::fusion::{max_output_length, DecodeConfig};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = from_json_with_path::<DecodeConfig>(text) {
            if cfg.validate().is_ok() {
                assert!(max_output_length(1000, &cfg) >= 1);
            }
        }
    }
});
