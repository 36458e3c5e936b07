#![no_main]

use libfuzzer_sys::fuzz_target;
use objmot::storage::parse_pred_meta;

fuzz_target!(|data: &[u8]| {
    let _ = parse_pred_meta(data);
});
