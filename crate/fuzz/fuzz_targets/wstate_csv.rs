//! Fuzz the ball-grid slice CSV parser.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = blowup_lab::io::parse_wstate_csv(text) {
        let rewritten = blowup_lab::io::write_wstate_csv(&file);
        assert_eq!(blowup_lab::io::parse_wstate_csv(&rewritten).unwrap(), file);
    }
});
