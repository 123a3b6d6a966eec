#![no_main]

use libfuzzer_sys::fuzz_target;
use strainshape::camera::OmniCameraModel;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cam) = OmniCameraModel::from_json(text) {
            let c = cam.center();
            let _ = cam.pixel_to_sphere(&c.clone_owned());
        }
    }
});
