#![no_main]

use libfuzzer_sys::fuzz_target;
use fusebeam_core::diversity::{difficulty_measure, TokenOutcomeMatrix};

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = TokenOutcomeMatrix::read_csv(data) {
        let _ = difficulty_measure(&m);
    }
});
