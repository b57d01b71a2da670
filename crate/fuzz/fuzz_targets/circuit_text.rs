#![no_main]

use libfuzzer_sys::fuzz_target;
use std::sync::OnceLock;

fn bench() -> &'static ionsim::gates::CompileContext {
    static CTX: OnceLock<ionsim::gates::CompileContext> = OnceLock::new();
    CTX.get_or_init(|| {
        let tau = 2.0 * std::f64::consts::PI;
        ionsim::gates::CompileContext::uniform(
            4,
            tau * 20e3,
            0.05,
            tau * 700e3,
            ionsim::interaction::Regime::IdealLd,
        )
        .unwrap()
    })
}

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(circuit) = ionsim::gates::parse_circuit(text) {
            // Parsed circuits must compile cleanly or reject cleanly.
            let _ = ionsim::gates::compile(&circuit, bench());
        }
    }
});
