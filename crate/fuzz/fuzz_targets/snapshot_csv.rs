//! Fuzz the snapshot CSV parser; accepted snapshots must round-trip byte-exactly.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(snapshot) = blowup_lab::io::parse_snapshot_csv(text) {
        let rewritten = blowup_lab::io::write_snapshot_csv(&snapshot);
        let reparsed = blowup_lab::io::parse_snapshot_csv(&rewritten).unwrap();
        assert_eq!(blowup_lab::io::write_snapshot_csv(&reparsed), rewritten);
    }
});
