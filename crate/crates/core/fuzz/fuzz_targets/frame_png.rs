#![no_main]

use libfuzzer_sys::fuzz_target;
use objmot::storage::{decode_frame_png, encode_frame_png};

fuzz_target!(|data: &[u8]| {
    if let Ok(frame) = decode_frame_png(data) {
        let again = decode_frame_png(&encode_frame_png(&frame)).expect("re-encoded frame decodes");
        assert_eq!(again, frame);
    }
});
