//! Fuzz the binary snapshot decoder; accepted payloads must round-trip.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(snapshot) = blowup_lab::io::parse_snapshot_bin(data) {
        let rewritten = blowup_lab::io::write_snapshot_bin(&snapshot);
        blowup_lab::io::parse_snapshot_bin(&rewritten).unwrap();
    }
});
