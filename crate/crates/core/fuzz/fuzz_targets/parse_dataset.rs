#![no_main]

use libfuzzer_sys::fuzz_target;
use strainshape::experiments::Dataset;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(ds) = Dataset::from_json(text) {
            let again = Dataset::from_json(&ds.to_json().unwrap()).unwrap();
            assert_eq!(again.configs.len(), ds.configs.len());
        }
    }
});
