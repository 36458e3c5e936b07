#![no_main]

use libfuzzer_sys::fuzz_target;
use objmot::storage::{decode_label_png, encode_label_png};

fuzz_target!(|data: &[u8]| {
    if let Ok(map) = decode_label_png(data) {
        let again = decode_label_png(&encode_label_png(&map)).expect("re-encoded map decodes");
        assert_eq!(again, map);
    }
});
