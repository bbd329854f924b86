#![no_main]

use libfuzzer_sys::fuzz_target;
use vgd_core::trailer::{decode_feature_file, encode_feature_file};

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = decode_feature_file(data) {
        assert_eq!(encode_feature_file(&m), data);
    }
});
