#![no_main]

use libfuzzer_sys::fuzz_target;
use objmot::storage::parse_manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = parse_manifest(data) {
        m.validate().expect("parsed manifests are valid");
        let _ = m.digest();
    }
});
