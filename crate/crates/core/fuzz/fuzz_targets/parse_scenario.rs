#![no_main]

use libfuzzer_sys::fuzz_target;
use strainshape::experiments::SyntheticScenario;

fuzz_target!(|data: &[u8]| {
    if let Ok(sc) = serde_json::from_slice::<SyntheticScenario>(data) {
        let _ = sc.validate();
    }
});
