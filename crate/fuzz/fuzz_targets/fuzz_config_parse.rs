//! Fuzzes the experiment-config parser: arbitrary bytes must never panic
//! it, and any config that parses must survive a save/parse round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = kslab::config::parse_config(text) {
        let canonical = kslab::config::save_config(&cfg);
        let reparsed = kslab::config::parse_config(&canonical)
            .expect("canonical form must reparse");
        assert_eq!(reparsed, cfg, "save/parse round trip must be the identity");
    }
});
