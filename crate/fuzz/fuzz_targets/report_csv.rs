//! Fuzz the report-series, surface, and index CSV parsers.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(reports) = blowup_lab::io::parse_energy_csv(text) {
        let rewritten = blowup_lab::io::write_energy_csv(&reports);
        assert_eq!(
            blowup_lab::io::parse_energy_csv(&rewritten).unwrap(),
            reports
        );
    }
    let _ = blowup_lab::io::parse_surface_csv(text);
    let _ = blowup_lab::io::parse_index(text);
});
