#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(state) = ionsim::statespace::parse_state_csv(text) {
            // Exponent-form floats round-trip bit-exactly, so a parsed state
            // must come back identical.
            let printed = ionsim::statespace::format_state_csv(&state);
            let again = ionsim::statespace::parse_state_csv(&printed)
                .expect("formatted state failed to reparse");
            assert_eq!(again, state);
        }
    }
});
