//! The checked-in fuzz corpus seeds must stay parseable; a stale seed makes
//! its fuzzer start from a dead input.

use std::fs;
use std::path::PathBuf;

fn corpus(dir: &str) -> Vec<(PathBuf, String)> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(dir);
    let mut seeds = Vec::new();
    let entries = fs::read_dir(&root).unwrap_or_else(|e| panic!("{}: {e}", root.display()));
    for entry in entries {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        seeds.push((path, text));
    }
    assert!(!seeds.is_empty(), "no seeds under {}", root.display());
    seeds
}

#[test]
fn trap_config_seeds_parse() {
    for (path, text) in corpus("trap_config") {
        ionsim::trap::parse_trap_config(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn pulse_program_seeds_parse() {
    for (path, text) in corpus("pulse_program") {
        let pulses = ionsim::interaction::parse_pulse_program(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(!pulses.is_empty(), "{}: empty program", path.display());
    }
}

#[test]
fn circuit_text_seeds_parse() {
    for (path, text) in corpus("circuit_text") {
        let circuit = ionsim::gates::parse_circuit(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(!circuit.is_empty(), "{}: empty circuit", path.display());
    }
}

#[test]
fn target_state_csv_seeds_parse() {
    for (path, text) in corpus("target_state_csv") {
        ionsim::synthesis::parse_target_state_csv(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn state_csv_seeds_parse() {
    for (path, text) in corpus("state_csv") {
        ionsim::statespace::parse_state_csv(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
