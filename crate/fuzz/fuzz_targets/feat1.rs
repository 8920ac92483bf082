#![no_main]

use libfuzzer_sys::fuzz_target;
use fusebeam_core::frontend::{decode_feat1, encode_feat1};

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = decode_feat1(data) {
        assert_eq!(encode_feat1(&f), data);
    }
});
