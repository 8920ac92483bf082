#![no_main]

use libfuzzer_sys::fuzz_target;
use fusebeam_core::frontend::read_wav_bytes;

fuzz_target!(|data: &[u8]| {
    if let Ok(a) = read_wav_bytes(data) {
        assert!(a.samples().iter().all(|s| s.is_finite()));
    }
});
