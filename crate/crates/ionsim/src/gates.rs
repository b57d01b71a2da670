//! Gates and their compilation to pulse schedules.
//!
//! The elementary operations are the carrier rotation A^l(phi) and the first
//! red sideband pulses B^{l,I} (on g-e) and B^{l,II} (on g-r). A rotation
//! R(theta, phi) is one carrier pulse at laser phase phi + pi/2; the B pulses
//! carry laser phase pi/2 so their effective phase phi_tilde is zero. A CNOT
//! with controls c1..cq and target t is the sequence
//!
//!   A^{1/2}(0) t; B^{1,I} c1; B^{1,II} c2..cq; B^{2,II} t;
//!   B^{1,II} cq..c2; B^{1,I} c1; A^{1/2}(pi) t
//!
//! (2Q+1 pulses on Q = q+1 ions). Controlled rotations conjugate carrier
//! rotations around two such CNOTs; the Monroe gate is a single carrier
//! 2p-pi pulse that exploits the n dependence of the exact Rabi rates.

use crate::chain::{Geometry, LaserConfig, ModeSpectrum};
use crate::interaction::{
    evolve_full, pulse_duration, pulse_unitary, tokenize, validity_flags, CouplingContext, Pulse,
    PulseArea, Regime, Transition,
};
use crate::statespace::{Level, QuantumState};
use crate::{Error, Result};
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// One abstract gate; ion indices are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum GateSpec {
    /// Single-qubit rotation R(theta, phi) with half-angle convention
    /// (theta = pi flips the qubit).
    Rotation { ion: usize, theta: f64, phi: f64 },
    Cnot { control: usize, target: usize },
    MultiCnot { controls: Vec<usize>, target: usize },
    /// Applies [[cos t, e^{2i p} sin t], [-e^{-2i p} sin t, cos t]] on the
    /// target when all controls are |e>.
    ControlledR { controls: Vec<usize>, target: usize, theta: f64, phi: f64 },
    /// Phase-free controlled rotation.
    ReducedControlledR { controls: Vec<usize>, target: usize, theta: f64 },
    /// Carrier 2p-pi pulse on one ion, CNOT between the bus (|0>/|1>) and the
    /// ion's internal state; requires eta^2 = 1/(2p).
    MonroeCnot { ion: usize, p: u64 },
}

impl GateSpec {
    /// Ions the gate touches, controls before target.
    pub fn ions(&self) -> Vec<usize> {
        match self {
            GateSpec::Rotation { ion, .. } | GateSpec::MonroeCnot { ion, .. } => vec![*ion],
            GateSpec::Cnot { control, target } => vec![*control, *target],
            GateSpec::MultiCnot { controls, target }
            | GateSpec::ControlledR { controls, target, .. }
            | GateSpec::ReducedControlledR { controls, target, .. } => {
                let mut v = controls.clone();
                v.push(*target);
                v
            }
        }
    }

    pub fn validate(&self, n_ions: usize) -> Result<()> {
        let ions = self.ions();
        for &ion in &ions {
            if ion < 1 || ion > n_ions {
                return Err(Error::physics(format!("ion {ion} outside 1..={n_ions}")));
            }
        }
        let mut seen = ions.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != ions.len() {
            return Err(Error::physics("gate ion indices must be distinct"));
        }
        match self {
            GateSpec::MultiCnot { controls, .. } if controls.is_empty() => {
                Err(Error::physics("multi-CNOT needs at least one control"))
            }
            GateSpec::MonroeCnot { p: 0, .. } => Err(Error::physics("monroe gate needs p >= 1")),
            _ => Ok(()),
        }
    }
}

/// Hardware the compiler targets: one bus mode and per-ion couplings.
#[derive(Debug, Clone)]
pub struct CompileContext {
    /// Index of the bus mode within its spectrum (0 = COM), for reporting.
    pub bus_mode: usize,
    /// Coupling of ion j at index j-1.
    pub couplings: Vec<CouplingContext>,
    /// Regime stamped on compiled pulses (Monroe pulses force exact rates).
    pub regime: Regime,
}

impl CompileContext {
    /// Identical couplings on every ion; the usual test-bench configuration.
    pub fn uniform(
        n_ions: usize,
        lambda_mag: f64,
        eta: f64,
        nu: f64,
        regime: Regime,
    ) -> Result<CompileContext> {
        if n_ions == 0 {
            return Err(Error::physics("need at least one ion"));
        }
        let ctx = CouplingContext::new(Complex64::new(lambda_mag, 0.0), eta, nu)?;
        Ok(CompileContext { bus_mode: 0, couplings: vec![ctx; n_ions], regime })
    }

    pub fn n_ions(&self) -> usize {
        self.couplings.len()
    }

    pub fn coupling(&self, ion: usize) -> Result<&CouplingContext> {
        if ion < 1 || ion > self.couplings.len() {
            return Err(Error::physics(format!("ion {ion} beyond chain")));
        }
        Ok(&self.couplings[ion - 1])
    }
}

/// Builds the compile context for one bus mode of a computed spectrum. Static
/// per-ion laser phase offsets drop out of gate fidelities (each ion's phase
/// ledger is referenced to its first pulse), so couplings use |lambda| real.
pub fn context_from_chain(
    spectrum: &ModeSpectrum,
    laser: &LaserConfig,
    mode: usize,
    regime: Regime,
) -> Result<CompileContext> {
    let etas = crate::chain::lamb_dicke_parameters(spectrum, laser, mode)?;
    let nu = spectrum.nu[mode];
    let mut couplings = Vec::with_capacity(etas.len());
    for (j, &eta) in etas.iter().enumerate() {
        let mut c = CouplingContext::new(Complex64::new(laser.lambda_mag, 0.0), eta, nu)?;
        if let Geometry::Standing { kind, ref chi } = laser.geometry {
            c.standing = Some((kind, chi[j]));
        }
        couplings.push(c);
    }
    Ok(CompileContext { bus_mode: mode, couplings, regime })
}

/// One pulse with its place on the timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedPulse {
    pub pulse: Pulse,
    /// Start time from schedule begin, s.
    pub start: f64,
    pub duration: f64,
}

/// Compiled, timed, phase-tracked pulse program.
#[derive(Debug, Clone)]
pub struct PulseSchedule {
    pub pulses: Vec<TimedPulse>,
    /// Effective phase phi_tilde = phi - (pi/2)|k| of every pulse, per ion in
    /// order of application; the first entry fixes that ion's reference.
    pub ledger: BTreeMap<usize, Vec<f64>>,
    /// Sum of pulse durations (pulses run strictly sequentially), s.
    pub total_time: f64,
    pub bus_mode: usize,
    /// Lamb-Dicke / weak-coupling margin notes; never failures.
    pub warnings: Vec<String>,
}

impl PulseSchedule {
    pub fn pulse_text(&self) -> String {
        let pulses: Vec<Pulse> = self.pulses.iter().map(|t| t.pulse).collect();
        crate::interaction::format_pulse_program(&pulses)
    }
}

fn carrier(ion: usize, area: PulseArea, phi: f64, regime: Regime) -> Pulse {
    Pulse { ion, k: 0, area, phase: phi + PI / 2.0, transition: Transition::Ge, regime }
}

fn red(ion: usize, area: PulseArea, transition: Transition, regime: Regime) -> Pulse {
    Pulse { ion, k: -1, area, phase: PI / 2.0, transition, regime }
}

fn rotation_pulses(ion: usize, theta: f64, phi: f64, regime: Regime, out: &mut Vec<Pulse>) -> Result<()> {
    if !theta.is_finite() || !phi.is_finite() {
        return Err(Error::physics("rotation angles must be finite"));
    }
    let (theta, phi) = if theta < 0.0 { (-theta, phi + PI) } else { (theta, phi) };
    if theta == 0.0 {
        return Ok(());
    }
    out.push(carrier(ion, PulseArea::from_radians(theta)?, phi, regime));
    Ok(())
}

fn multi_cnot_pulses(controls: &[usize], target: usize, regime: Regime, out: &mut Vec<Pulse>) -> Result<()> {
    let half = PulseArea::new(1, 2)?;
    let pi1 = PulseArea::new(1, 1)?;
    let pi2 = PulseArea::new(2, 1)?;
    out.push(carrier(target, half, 0.0, regime));
    out.push(red(controls[0], pi1, Transition::Ge, regime));
    for &c in &controls[1..] {
        out.push(red(c, pi1, Transition::Gr, regime));
    }
    out.push(red(target, pi2, Transition::Gr, regime));
    for &c in controls[1..].iter().rev() {
        out.push(red(c, pi1, Transition::Gr, regime));
    }
    out.push(red(controls[0], pi1, Transition::Ge, regime));
    out.push(carrier(target, half, PI, regime));
    Ok(())
}

fn controlled_r_pulses(
    controls: &[usize],
    target: usize,
    theta: f64,
    phi: f64,
    regime: Regime,
    out: &mut Vec<Pulse>,
) -> Result<()> {
    if controls.is_empty() {
        return rotation_pulses(target, 2.0 * theta, 2.0 * phi, regime, out);
    }
    // R = R1^dag, NOT, R2^dag, NOT, R2, R1 in execution order; R1 = R(pi, phi)
    // and R2 = R(theta, 0), with daggers realized as R(pi, phi+pi), R(theta, pi).
    rotation_pulses(target, PI, phi + PI, regime, out)?;
    multi_cnot_pulses(controls, target, regime, out)?;
    rotation_pulses(target, theta, PI, regime, out)?;
    multi_cnot_pulses(controls, target, regime, out)?;
    rotation_pulses(target, theta, 0.0, regime, out)?;
    rotation_pulses(target, PI, phi, regime, out)?;
    Ok(())
}

fn reduced_controlled_r_pulses(
    controls: &[usize],
    target: usize,
    theta: f64,
    regime: Regime,
    out: &mut Vec<Pulse>,
) -> Result<()> {
    if controls.is_empty() {
        return rotation_pulses(target, 2.0 * theta, 0.0, regime, out);
    }
    multi_cnot_pulses(controls, target, regime, out)?;
    rotation_pulses(target, theta, PI, regime, out)?;
    multi_cnot_pulses(controls, target, regime, out)?;
    rotation_pulses(target, theta, 0.0, regime, out)?;
    Ok(())
}

fn monroe_pulse(ion: usize, p: u64, ctx: &CompileContext, out: &mut Vec<Pulse>) -> Result<()> {
    let eta = ctx.coupling(ion)?.eta;
    let wanted = 1.0 / (2.0 * p as f64);
    if (eta * eta - wanted).abs() > 1e-6 {
        return Err(Error::physics(format!(
            "monroe gate needs eta^2 = 1/(2p) = {wanted:.6e}, but ion {ion} has eta^2 = {:.6e}",
            eta * eta
        )));
    }
    // The n dependence of the exact rates does the conditional logic, so the
    // regime is forced regardless of the compile default.
    out.push(Pulse {
        ion,
        k: 0,
        area: PulseArea::new(2 * p, 1)?,
        phase: 0.0,
        transition: Transition::Ge,
        regime: Regime::ExactLaguerre,
    });
    Ok(())
}

fn lower(gate: &GateSpec, ctx: &CompileContext, out: &mut Vec<Pulse>) -> Result<()> {
    match gate {
        GateSpec::Rotation { ion, theta, phi } => rotation_pulses(*ion, *theta, *phi, ctx.regime, out),
        GateSpec::Cnot { control, target } => multi_cnot_pulses(&[*control], *target, ctx.regime, out),
        GateSpec::MultiCnot { controls, target } => {
            multi_cnot_pulses(controls, *target, ctx.regime, out)
        }
        GateSpec::ControlledR { controls, target, theta, phi } => {
            controlled_r_pulses(controls, *target, *theta, *phi, ctx.regime, out)
        }
        GateSpec::ReducedControlledR { controls, target, theta } => {
            reduced_controlled_r_pulses(controls, *target, *theta, ctx.regime, out)
        }
        GateSpec::MonroeCnot { ion, p } => monroe_pulse(*ion, *p, ctx, out),
    }
}

fn assemble(pulses: Vec<Pulse>, ctx: &CompileContext) -> Result<PulseSchedule> {
    let mut timed = Vec::with_capacity(pulses.len());
    let mut ledger: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut t = 0.0;
    for pulse in pulses {
        let duration = pulse_duration(&pulse, ctx.coupling(pulse.ion)?)?;
        if !(duration > 0.0) {
            return Err(Error::physics("compiled pulse durations must be positive"));
        }
        let phi_tilde = pulse.phase - PI / 2.0 * pulse.k.unsigned_abs() as f64;
        ledger.entry(pulse.ion).or_default().push(phi_tilde);
        timed.push(TimedPulse { pulse, start: t, duration });
        t += duration;
    }
    let mut warnings = Vec::new();
    for &ion in ledger.keys() {
        let flags = validity_flags(ctx.coupling(ion)?, 1);
        if !flags.lamb_dicke_ok {
            warnings.push(format!(
                "ion {ion}: eta^2 (n+1) = {:.3} exceeds the Lamb-Dicke margin 0.1",
                flags.eta_sq_n_plus_1
            ));
        }
        if !flags.weak_coupling_ok {
            warnings.push(format!(
                "ion {ion}: |lambda|/nu = {:.3} exceeds the weak-coupling margin 0.05",
                flags.lambda_over_nu
            ));
        }
    }
    Ok(PulseSchedule { pulses: timed, ledger, total_time: t, bus_mode: ctx.bus_mode, warnings })
}

/// Compiles a circuit to a timed pulse schedule. The bus mode is assumed to
/// start in |0>; Lamb-Dicke and weak-coupling margins become warnings on the
/// schedule, never failures.
pub fn compile(circuit: &[GateSpec], ctx: &CompileContext) -> Result<PulseSchedule> {
    let mut pulses = Vec::new();
    for gate in circuit {
        gate.validate(ctx.n_ions())?;
        lower(gate, ctx, &mut pulses)?;
    }
    assemble(pulses, ctx)
}

/// Times and phase-ledgers an explicit pulse list, e.g. a re-parsed pulse
/// program, without going through gate lowering.
pub fn schedule_pulses(pulses: Vec<Pulse>, ctx: &CompileContext) -> Result<PulseSchedule> {
    for pulse in &pulses {
        if pulse.ion < 1 || pulse.ion > ctx.n_ions() {
            return Err(Error::physics(format!("ion {} outside 1..={}", pulse.ion, ctx.n_ions())));
        }
    }
    assemble(pulses, ctx)
}

/// The three-pulse complete CNOT between two ions built on the Monroe gate:
/// red pi on the control maps its internal state onto the bus, the carrier
/// 2p-pi pulse flips the target conditionally, a second red pi maps back.
pub fn monroe_complete_schedule(
    control: usize,
    target: usize,
    p: u64,
    ctx: &CompileContext,
) -> Result<PulseSchedule> {
    if control == target {
        return Err(Error::physics("gate ion indices must be distinct"));
    }
    GateSpec::MonroeCnot { ion: target, p }.validate(ctx.n_ions())?;
    if control < 1 || control > ctx.n_ions() {
        return Err(Error::physics(format!("ion {control} outside 1..={}", ctx.n_ions())));
    }
    let mut pulses = Vec::new();
    pulses.push(red(control, PulseArea::new(1, 1)?, Transition::Ge, ctx.regime));
    monroe_pulse(target, p, ctx, &mut pulses)?;
    pulses.push(red(control, PulseArea::new(1, 1)?, Transition::Ge, ctx.regime));
    assemble(pulses, ctx)
}

/// Runs a schedule on a state. Ideal-regime pulses apply their block unitary;
/// full-regime pulses are integrated. `regime` overrides every pulse's tag
/// when given (do not override schedules containing Monroe pulses: their
/// logic needs exact rates). Returns accumulated warnings.
pub fn simulate_schedule(
    schedule: &PulseSchedule,
    state: &mut QuantumState,
    ctx: &CompileContext,
    regime: Option<Regime>,
) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    for timed in &schedule.pulses {
        let mut pulse = timed.pulse;
        if let Some(r) = regime {
            pulse.regime = r;
        }
        let coupling = ctx.coupling(pulse.ion)?;
        if pulse.regime == Regime::FullOffresonant {
            let report = evolve_full(state, &pulse, coupling, timed.duration, None)?;
            warnings.extend(report.warnings);
        } else {
            let op = pulse_unitary(&pulse, coupling, state.n_max)?;
            warnings.extend(op.apply(state)?);
        }
    }
    let bus_leak = 1.0 - bus_ground_population(state);
    if bus_leak > 1e-8 {
        warnings.push(format!("bus leakage {bus_leak:.3e} after schedule"));
    }
    Ok(warnings)
}

fn bus_ground_population(state: &QuantumState) -> f64 {
    let fock_dim = state.n_max + 1;
    state
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(i, _)| i % fock_dim == 0)
        .map(|(_, a)| a.norm_sqr())
        .sum()
}

/// One verified input of a truth table.
#[derive(Debug, Clone)]
pub struct TruthRow {
    /// Basis assignment of the probed qubits, in the order given.
    pub input: Vec<Level>,
    /// Computational amplitudes (g/e register labels, bus |0>) above 1e-12,
    /// largest first.
    pub outputs: Vec<(String, Complex64)>,
    /// Population outside the computational subspace (any |r>, any phonon).
    pub leakage: f64,
}

/// Simulates every basis input of `qubits` (other ions in |g>, bus in |0>)
/// through the schedule. The first listed qubit is the most significant bit
/// of the row ordering.
pub fn truth_table(
    schedule: &PulseSchedule,
    ctx: &CompileContext,
    qubits: &[usize],
    n_max: usize,
) -> Result<Vec<TruthRow>> {
    let n_ions = ctx.n_ions();
    for &q in qubits {
        if q < 1 || q > n_ions {
            return Err(Error::physics(format!("ion {q} beyond chain")));
        }
    }
    let mut rows = Vec::with_capacity(1 << qubits.len());
    for pattern in 0..(1usize << qubits.len()) {
        let mut spins = vec![Level::G; n_ions];
        let mut input = Vec::with_capacity(qubits.len());
        for (bit, &q) in qubits.iter().enumerate() {
            let level = if pattern >> (qubits.len() - 1 - bit) & 1 == 1 { Level::E } else { Level::G };
            spins[q - 1] = level;
            input.push(level);
        }
        let mut state = QuantumState::basis(&spins, 0, n_max)?;
        simulate_schedule(schedule, &mut state, ctx, None)?;
        rows.push(truth_row(input, &state));
    }
    Ok(rows)
}

fn truth_row(input: Vec<Level>, state: &QuantumState) -> TruthRow {
    let fock_dim = state.n_max + 1;
    let mut outputs = Vec::new();
    let mut comp_pop = 0.0;
    for spin_index in 0..state.amplitudes.len() / fock_dim {
        let mut label = String::new();
        let mut rest = spin_index;
        let mut computational = true;
        let mut digits = Vec::new();
        for _ in 0..state.n_ions {
            digits.push(rest % 3);
            rest /= 3;
        }
        for &d in digits.iter().rev() {
            if d == 2 {
                computational = false;
            }
            label.push(Level::from_index(d).to_char());
        }
        if !computational {
            continue;
        }
        let amp = state.amplitudes[spin_index * fock_dim];
        comp_pop += amp.norm_sqr();
        if amp.norm() > 1e-12 {
            outputs.push((label, amp));
        }
    }
    outputs.sort_by(|a, b| b.1.norm().total_cmp(&a.1.norm()));
    TruthRow { input, outputs, leakage: (1.0 - comp_pop).max(0.0) }
}

/// Parses the circuit text format, one gate per line:
/// `rot <ion> <theta> <phi>`, `cnot <c> <t>`, `ccnot <c1> <c2> <t>`,
/// `ncnot <c1> .. <cq> <t>`, `crot <c1> .. <cq> <t> <theta> <phi>`,
/// `monroe <ion> <p>`. Comments start with `#`.
pub fn parse_circuit(text: &str) -> Result<Vec<GateSpec>> {
    let mut gates = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_num = lineno + 1;
        let line = raw.trim_end_matches('\r');
        let mut toks = tokenize(line);
        if let Some(cut) = toks.iter().position(|t| t.text.starts_with('#')) {
            toks.truncate(cut);
        }
        if toks.is_empty() {
            continue;
        }
        let args = &toks[1..];
        let ion_at = |i: usize| -> Result<usize> {
            args[i]
                .text
                .parse::<usize>()
                .ok()
                .filter(|&v| v >= 1)
                .ok_or_else(|| {
                    Error::parse(line_num, args[i].col, format!("malformed ion `{}`", args[i].text))
                })
        };
        let float_at = |i: usize| -> Result<f64> {
            args[i]
                .text
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::parse(line_num, args[i].col, format!("malformed number `{}`", args[i].text))
                })
        };
        let want = |n: usize| -> Result<()> {
            if args.len() != n {
                return Err(Error::parse(
                    line_num,
                    line.chars().count() + 1,
                    format!("expected {n} arguments, got {}", args.len()),
                ));
            }
            Ok(())
        };
        let gate = match toks[0].text {
            "rot" => {
                want(3)?;
                GateSpec::Rotation { ion: ion_at(0)?, theta: float_at(1)?, phi: float_at(2)? }
            }
            "cnot" => {
                want(2)?;
                GateSpec::Cnot { control: ion_at(0)?, target: ion_at(1)? }
            }
            "ccnot" => {
                want(3)?;
                GateSpec::MultiCnot {
                    controls: vec![ion_at(0)?, ion_at(1)?],
                    target: ion_at(2)?,
                }
            }
            "ncnot" => {
                if args.len() < 2 {
                    return Err(Error::parse(
                        line_num,
                        line.chars().count() + 1,
                        "ncnot needs at least one control and a target".to_string(),
                    ));
                }
                let mut ions = Vec::with_capacity(args.len());
                for i in 0..args.len() {
                    ions.push(ion_at(i)?);
                }
                let target = ions.pop().unwrap();
                GateSpec::MultiCnot { controls: ions, target }
            }
            "crot" => {
                if args.len() < 3 {
                    return Err(Error::parse(
                        line_num,
                        line.chars().count() + 1,
                        "crot needs a target, theta and phi".to_string(),
                    ));
                }
                let n_ions = args.len() - 2;
                let mut ions = Vec::with_capacity(n_ions);
                for i in 0..n_ions {
                    ions.push(ion_at(i)?);
                }
                let target = ions.pop().unwrap();
                GateSpec::ControlledR {
                    controls: ions,
                    target,
                    theta: float_at(args.len() - 2)?,
                    phi: float_at(args.len() - 1)?,
                }
            }
            "monroe" => {
                want(2)?;
                let p = args[1].text.parse::<u64>().ok().filter(|&v| v >= 1).ok_or_else(|| {
                    Error::parse(line_num, args[1].col, format!("malformed p `{}`", args[1].text))
                })?;
                GateSpec::MonroeCnot { ion: ion_at(0)?, p }
            }
            other => {
                return Err(Error::parse(
                    line_num,
                    toks[0].col,
                    format!("unknown gate `{other}`"),
                ))
            }
        };
        gates.push(gate);
    }
    Ok(gates)
}
