#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(target) = ionsim::synthesis::parse_target_state_csv(text) {
            // The printed form drops zero-amplitude rows, so phases survive
            // only where the amplitude does; amplitudes survive bit-exactly.
            let printed = ionsim::synthesis::format_target_state_csv(&target);
            let again = ionsim::synthesis::parse_target_state_csv(&printed)
                .expect("formatted target failed to reparse");
            assert_eq!(again.n, target.n);
            assert_eq!(again.amplitudes, target.amplitudes);
            for i in 0..target.amplitudes.len() {
                if target.amplitudes[i] != 0.0 {
                    assert_eq!(again.phases[i], target.phases[i]);
                }
            }
        }
    }
});
