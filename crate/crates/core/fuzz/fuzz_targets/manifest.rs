#![no_main]

use libfuzzer_sys::fuzz_target;
use vgd_core::dataset::{parse_manifest, ManifestRow};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(ds) = parse_manifest(text) {
        // accepted records survive a round trip through the wire form
        let again: String =
            ds.records.iter().map(|r| serde_json::to_string(&ManifestRow::from_record(r)).unwrap() + "\n").collect();
        let back = parse_manifest(&again).expect("re-encoded manifest parses");
        assert_eq!(back.len(), ds.len());
    }
});
