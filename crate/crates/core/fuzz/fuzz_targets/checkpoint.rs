#![no_main]

use libfuzzer_sys::fuzz_target;
use vgd_core::models::BuiltModel;
use vgd_core::tensor::{decode_checkpoint, encode_checkpoint};

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = decode_checkpoint(data) {
        // canonical after one pass
        let once = encode_checkpoint(&ck);
        let twice = encode_checkpoint(&decode_checkpoint(&once).expect("re-encoded checkpoint decodes"));
        assert_eq!(once, twice);
        let _ = BuiltModel::from_checkpoint(&ck);
    }
});
