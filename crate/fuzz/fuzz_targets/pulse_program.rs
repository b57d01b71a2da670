#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(pulses) = ionsim::interaction::parse_pulse_program(text) {
            // Anything that parses must survive a print/reparse cycle intact.
            let printed = ionsim::interaction::format_pulse_program(&pulses);
            let again = ionsim::interaction::parse_pulse_program(&printed)
                .expect("formatted program failed to reparse");
            assert_eq!(again, pulses);
        }
    }
});
