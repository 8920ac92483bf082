#![no_main]

use libfuzzer_sys::fuzz_target;
use fusebeam_core::scoring::ToyModel;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = ToyModel::from_json(text) {
            assert_eq!(ToyModel::from_json(&m.to_json()).unwrap(), m);
        }
    }
});
