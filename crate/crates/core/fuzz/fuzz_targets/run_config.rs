#![no_main]

use libfuzzer_sys::fuzz_target;
use vgd_core::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut c = RunConfig::default();
    if c.apply_text(text, None).is_ok() {
        let _ = c.validate();
    }
});
