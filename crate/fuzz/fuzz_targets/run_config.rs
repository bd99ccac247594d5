//! Fuzz the JSON configuration parsers: parsing may fail, but it must not
//! panic, and an accepted config must survive a serialize/parse round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = blowup_lab::config::RunConfig::from_json(text) {
        let echoed = blowup_lab::config::RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(echoed, cfg);
    }
    let _ = blowup_lab::config::SweepConfig::from_json(text);
});
