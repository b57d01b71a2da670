//! Pulse-level simulator of a linear-Paul-trap ion-string quantum processor and a
//! compiler from quantum circuits to timed, phase-tracked laser-pulse schedules.
//!
//! The crate is organized bottom-up along the physics:
//!
//! - [`trap`]: single-ion motion in the RF quadrupole (Mathieu stability, secular
//!   frequencies, well depths, zig-zag limit).
//! - [`chain`]: ion-string equilibrium positions, axial normal modes and per-ion
//!   Lamb-Dicke parameters.
//! - [`statespace`]: joint internal (three-level) plus bus-phonon state vectors,
//!   labels, CSV round-trips and fluorescence readout.
//! - [`interaction`]: laser-ion flopping dynamics on carrier and sidebands, pulse
//!   unitaries in three fidelity regimes, pulse-program text.
//! - [`gates`]: gate specifications, lowering to pulse schedules with phase
//!   tracking, schedule simulation and truth tables.
//! - [`synthesis`]: state-preparation networks (W states, arbitrary three-qubit
//!   superposition) emitted as gate lists.
//! - [`budget`]: quantitative cooling, off-resonant error and gate-speed budgets.
//!
//! All frequencies in the API are angular (rad/s) unless a name says `_hz`; file
//! formats use Hz and radians as documented per format.

pub mod budget;
pub mod chain;
pub mod constants;
pub mod gates;
pub mod interaction;
pub mod statespace;
pub mod synthesis;
pub mod trap;

/// Crate-wide error type. Parse errors carry 1-based line/column positions.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Text input violated a file-format grammar.
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    /// Input was well-formed but physically or numerically invalid.
    #[error("{0}")]
    Physics(String),
}

impl Error {
    pub(crate) fn parse(line: usize, col: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, col, msg: msg.into() }
    }

    pub(crate) fn physics(msg: impl Into<String>) -> Self {
        Error::Physics(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
