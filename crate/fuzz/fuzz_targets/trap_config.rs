#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ionsim::trap::parse_trap_config(text) {
            // Parsed configs must be safe to summarize.
            let _ = cfg.omega_z();
            let _ = ionsim::trap::trap_characteristics(&cfg);
        }
    }
});
