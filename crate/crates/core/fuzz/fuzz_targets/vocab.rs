#![no_main]

use libfuzzer_sys::fuzz_target;
use vgd_core::text::Vocab;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = Vocab::parse(text) {
        assert_eq!(Vocab::parse(&v.to_text()).expect("re-encoded vocabulary parses"), v);
    }
});
