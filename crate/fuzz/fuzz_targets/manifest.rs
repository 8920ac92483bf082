#![no_main]

use libfuzzer_sys::fuzz_target;
use std::path::Path;

use fusebeam_core::config::Manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = Manifest::parse(text, Path::new("/data"));
    }
});
