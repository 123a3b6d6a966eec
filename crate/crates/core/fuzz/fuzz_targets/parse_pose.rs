#![no_main]

use libfuzzer_sys::fuzz_target;
use strainshape::liegroup::Pose;

fuzz_target!(|data: &[u8]| {
    if let Ok(pose) = serde_json::from_slice::<Pose>(data) {
        let back: Pose = serde_json::from_str(&serde_json::to_string(&pose).unwrap()).unwrap();
        assert_eq!(back, pose);
    }
});
