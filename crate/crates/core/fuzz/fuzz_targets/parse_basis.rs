#![no_main]

use libfuzzer_sys::fuzz_target;
use strainshape::strainbasis::BasisSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(spec) = serde_json::from_slice::<BasisSpec>(data) {
        if spec.validate().is_ok() {
            let _ = spec.scalar_values(spec.length * 0.5);
        }
    }
});
