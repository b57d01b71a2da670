//! Acceptance gates for the whole artifact. Each test covers one numbered
//! criterion, prints a single `ACCEPTANCE <n> PASS/FAIL` line with its
//! headline numbers (visible under `--nocapture`), and enforces both the
//! numeric tolerances and the runtime budget.

mod common;

use common::{concurrence, two_qubit_density, DisplacementOracle};
use ionsim::budget::{gate_time_table, stark_shift, timing_report};
use ionsim::chain::{equilibrium_positions, lamb_dicke_parameters, normal_modes, LaserConfig};
use ionsim::gates::{compile, simulate_schedule, truth_table, CompileContext, GateSpec, PulseSchedule};
use ionsim::interaction::{
    absorption_lines, evolve_full, pulse_duration, pulse_unitary, rabi_frequency,
    thermal_occupation, CouplingContext, ModeSpec, Pulse, PulseArea, Regime, SpectralLine,
    Transition,
};
use ionsim::statespace::{fidelity, seeded_rng, Level, QuantumState};
use ionsim::synthesis::{arbitrary_state_network, w_state_network, TargetState};
use ionsim::trap::IonSpecies;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use std::time::Instant;

const TAU: f64 = 2.0 * std::f64::consts::PI;
const PI: f64 = std::f64::consts::PI;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !($cond) {
            return Err(format!($($fmt)*));
        }
    };
}

fn ok<T>(r: ionsim::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn check(criterion: usize, budget_s: f64, body: impl FnOnce() -> Result<String, String>) {
    let t0 = Instant::now();
    let outcome = body();
    let dt = t0.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("ACCEPTANCE {criterion} PASS: {detail} [{dt:.3} s]");
            assert!(dt < budget_s, "criterion {criterion} took {dt:.3} s, budget {budget_s} s");
        }
        Err(detail) => {
            println!("ACCEPTANCE {criterion} FAIL: {detail} [{dt:.3} s]");
            panic!("criterion {criterion}: {detail}");
        }
    }
}

fn bench_context(n_ions: usize) -> Result<CompileContext, String> {
    ok(CompileContext::uniform(n_ions, TAU * 20e3, 0.05, TAU * 700e3, Regime::IdealLd))
}

// 1. Two- and three-ion equilibria against the closed-form roots, and the
//
//    calcium three-ion spacing at 700 kHz axial confinement.
fn equilibria() -> Result<String, String> {
    let ca = IonSpecies::ca40();
    let omega_z = TAU * 700e3;

    let two = ok(equilibrium_positions(2, &ca, omega_z))?;
    let z2 = 0.25f64.powf(1.0 / 3.0);
    ensure!((two.z[0] + z2).abs() <= 1e-12 * z2, "N=2 left ion at {} (want {})", two.z[0], -z2);
    ensure!((two.z[1] - z2).abs() <= 1e-12 * z2, "N=2 right ion at {} (want {})", two.z[1], z2);

    let three = ok(equilibrium_positions(3, &ca, omega_z))?;
    let z3 = 1.25f64.powf(1.0 / 3.0);
    ensure!(three.z[1].abs() <= 1e-12, "N=3 center ion at {}", three.z[1]);
    ensure!((three.z[0] + z3).abs() <= 1e-12 * z3, "N=3 left ion at {} (want {})", three.z[0], -z3);
    ensure!((three.z[2] - z3).abs() <= 1e-12 * z3, "N=3 right ion at {} (want {})", three.z[2], z3);

    let spacing = three.min_spacing();
    ensure!(
        (spacing - 6.1e-6).abs() <= 0.05e-6,
        "three-ion Ca spacing {:.4} um outside 6.1 +- 0.05 um",
        spacing * 1e6
    );
    Ok(format!("analytic equilibria reproduced; Ca 3-ion spacing {:.3} um", spacing * 1e6))
}

#[test]
fn acceptance_01_equilibrium_positions() {
    check(1, 0.1, equilibria);
}

// 2. Mode eigenvalues mu = 1, 3, 5.8, the analytic eigenvectors under the
//    stated sign convention, and orthonormality up to twenty ions.
fn mode_spectra() -> Result<String, String> {
    let ca = IonSpecies::ca40();
    let omega_z = TAU * 700e3;

    let s2 = 0.5f64.sqrt();
    let two = ok(normal_modes(&ok(equilibrium_positions(2, &ca, omega_z))?))?;
    let want_mu2 = [1.0, 3.0];
    let want_d2 = [[s2, s2], [-s2, s2]];
    for alpha in 0..2 {
        ensure!(
            (two.mu[alpha] - want_mu2[alpha]).abs() <= 1e-10,
            "N=2 mu_{alpha} = {:.12}",
            two.mu[alpha]
        );
        for ion in 0..2 {
            ensure!(
                (two.d[alpha][ion] - want_d2[alpha][ion]).abs() <= 1e-10,
                "N=2 mode {alpha} component {ion} = {:.12}",
                two.d[alpha][ion]
            );
        }
    }

    let s3 = (1f64 / 3.0).sqrt();
    let s6 = (1f64 / 6.0).sqrt();
    let three = ok(normal_modes(&ok(equilibrium_positions(3, &ca, omega_z))?))?;
    let want_mu3 = [1.0, 3.0, 5.8];
    let want_d3 = [[s3, s3, s3], [-s2, 0.0, s2], [s6, -2.0 * s6, s6]];
    for alpha in 0..3 {
        ensure!(
            (three.mu[alpha] - want_mu3[alpha]).abs() <= 1e-10,
            "N=3 mu_{alpha} = {:.12}",
            three.mu[alpha]
        );
        for ion in 0..3 {
            ensure!(
                (three.d[alpha][ion] - want_d3[alpha][ion]).abs() <= 1e-10,
                "N=3 mode {alpha} component {ion} = {:.12}",
                three.d[alpha][ion]
            );
        }
    }

    let mut worst = 0.0f64;
    for n in 2..=20usize {
        let spectrum = ok(normal_modes(&ok(equilibrium_positions(n, &ca, omega_z))?))?;
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = (0..n).map(|i| spectrum.d[a][i] * spectrum.d[b][i]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
    }
    ensure!(worst <= 1e-10, "orthonormality defect {worst:.3e} for some N <= 20");
    Ok(format!("mu = (1, 3, 5.8) and analytic eigenvectors; orthonormality defect {worst:.1e} up to N = 20"))
}

#[test]
fn acceptance_02_normal_modes() {
    check(2, 0.5, mode_spectra);
}

// 3. Closed-form Rabi rates against a truncated matrix exponential of the
//    displacement operator.
fn rabi_rates() -> Result<String, String> {
    let oracle = DisplacementOracle::new(64);
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for &eta in &[0.05, 0.1, 0.2, 0.3, 0.4, 0.5] {
        let ctx = ok(CouplingContext::new(Complex64::new(1.0, 0.0), eta, 1e6))?;
        for n in 0..=10usize {
            for k in -3i64..=3 {
                let got = rabi_frequency(&ctx, n, k);
                let want = oracle.element(n + k.unsigned_abs() as usize, n, eta);
                worst = worst.max((got - want).norm());
                count += 1;
            }
        }
    }
    ensure!(worst <= 1e-8, "worst |Omega - oracle| = {worst:.3e}");
    Ok(format!("{count} rates within {worst:.1e} of the matrix-exponential oracle"))
}

#[test]
fn acceptance_03_rabi_rates_vs_matrix_exponential() {
    check(3, 5.0, rabi_rates);
}

fn core_steps(
    schedule: &PulseSchedule,
    ctx: &CompileContext,
    start: [Level; 2],
    marks: [(Vec<Level>, usize, Complex64); 3],
) -> Result<(), String> {
    let mut state = ok(QuantumState::basis(&start, 0, 4))?;
    for (timed, (spins, fock, want)) in schedule.pulses[1..4].iter().zip(marks) {
        let op = ok(pulse_unitary(&timed.pulse, ok(ctx.coupling(timed.pulse.ion))?, 4))?;
        ok(op.apply(&mut state))?;
        let amp = ok(state.amplitude(&spins, fock))?;
        ensure!(
            (amp - want).norm() <= 1e-12,
            "from |{}{}, 0>: pulse on ion {} left amplitude {amp} (want {want})",
            start[0].to_char(),
            start[1].to_char(),
            timed.pulse.ion
        );
    }
    Ok(())
}

// 4. Two-ion CNOT truth table and the sign bookkeeping of the three-pulse
//    core (red pi on the control, 2 pi g-r on the target, red pi back).
fn cnot_gate() -> Result<String, String> {
    let ctx = ok(CompileContext::uniform(2, TAU * 20e3, 0.1, TAU * 700e3, Regime::IdealLd))?;
    let schedule = ok(compile(&[GateSpec::Cnot { control: 1, target: 2 }], &ctx))?;
    ensure!(schedule.pulses.len() == 5, "CNOT lowered to {} pulses", schedule.pulses.len());

    let rows = ok(truth_table(&schedule, &ctx, &[1, 2], 4))?;
    let expected = ["gg", "ge", "ee", "eg"];
    let mut min_fid = 1.0f64;
    for (row, want) in rows.iter().zip(expected) {
        let amp = row
            .outputs
            .iter()
            .find(|(label, _)| label == want)
            .map(|&(_, a)| a)
            .unwrap_or_default();
        let fid = amp.norm_sqr();
        ensure!(fid >= 1.0 - 1e-10, "input {:?}: fidelity {fid} on {want}", row.input);
        ensure!(row.leakage <= 1e-10, "input {:?}: leakage {:.3e}", row.input, row.leakage);
        min_fid = min_fid.min(fid);
    }

    let (g, e) = (Level::G, Level::E);
    let one = Complex64::new(1.0, 0.0);
    let mi = Complex64::new(0.0, -1.0);
    core_steps(&schedule, &ctx, [g, g], [(vec![g, g], 0, one), (vec![g, g], 0, one), (vec![g, g], 0, one)])?;
    core_steps(&schedule, &ctx, [g, e], [(vec![g, e], 0, one), (vec![g, e], 0, one), (vec![g, e], 0, one)])?;
    core_steps(&schedule, &ctx, [e, g], [(vec![g, g], 1, mi), (vec![g, g], 1, -mi), (vec![e, g], 0, one)])?;
    core_steps(&schedule, &ctx, [e, e], [(vec![g, e], 1, mi), (vec![g, e], 1, mi), (vec![e, e], 0, -one)])?;

    Ok(format!("truth table exact (worst row 1 - {:.1e}); intermediate signs verified", 1.0 - min_fid))
}

#[test]
fn acceptance_04_cnot_truth_table() {
    check(4, 1.0, cnot_gate);
}

// 5. Exhaustive multi-control CNOT truth tables on three to five ions.
fn multi_cnot() -> Result<String, String> {
    let mut min_fid = 1.0f64;
    let mut rows_checked = 0usize;
    for q in 3..=5usize {
        let ctx = bench_context(q)?;
        let controls: Vec<usize> = (1..q).collect();
        let schedule =
            ok(compile(&[GateSpec::MultiCnot { controls, target: q }], &ctx))?;
        ensure!(
            schedule.pulses.len() == 2 * q + 1,
            "Q={q} lowered to {} pulses (want {})",
            schedule.pulses.len(),
            2 * q + 1
        );
        let qubits: Vec<usize> = (1..=q).collect();
        for row in ok(truth_table(&schedule, &ctx, &qubits, 4))? {
            let fires = row.input[..q - 1].iter().all(|&l| l == Level::E);
            let want: String = row
                .input
                .iter()
                .enumerate()
                .map(|(i, &l)| {
                    if fires && i == q - 1 {
                        if l == Level::G { 'e' } else { 'g' }
                    } else {
                        l.to_char()
                    }
                })
                .collect();
            let amp = row
                .outputs
                .iter()
                .find(|(label, _)| *label == want)
                .map(|&(_, a)| a)
                .unwrap_or_default();
            let fid = amp.norm_sqr();
            ensure!(fid >= 1.0 - 1e-9, "Q={q} input {:?} -> {want}: fidelity {fid}", row.input);
            min_fid = min_fid.min(fid);
            rows_checked += 1;
        }
    }
    Ok(format!("{rows_checked} basis inputs across Q = 3, 4, 5; worst fidelity 1 - {:.1e}", 1.0 - min_fid))
}

#[test]
fn acceptance_05_multi_cnot_exhaustive() {
    check(5, 30.0, multi_cnot);
}

// 6. Monroe gate at eta^2 = 1/2 (p = 1): the single 2 pi carrier pulse with
//    exact rates realizes the bus CNOT map, with the documented global (-1)^p.
fn monroe_gate() -> Result<String, String> {
    let eta = 0.5f64.sqrt();
    let ctx = ok(CompileContext::uniform(1, TAU * 20e3, eta, TAU * 700e3, Regime::ExactLaguerre))?;
    let schedule = ok(compile(&[GateSpec::MonroeCnot { ion: 1, p: 1 }], &ctx))?;
    ensure!(schedule.pulses.len() == 1, "Monroe gate lowered to {} pulses", schedule.pulses.len());

    let mi = Complex64::new(0.0, -1.0);
    let cases = [
        (Level::G, 0usize, Level::G, 0usize, Complex64::new(-1.0, 0.0)),
        (Level::E, 0, Level::E, 0, Complex64::new(-1.0, 0.0)),
        (Level::G, 1, Level::E, 1, mi),
        (Level::E, 1, Level::G, 1, mi),
    ];
    for (l_in, n_in, l_out, n_out, want) in cases {
        let mut state = ok(QuantumState::basis(&[l_in], n_in, 4))?;
        ok(simulate_schedule(&schedule, &mut state, &ctx, None))?;
        let amp = ok(state.amplitude(&[l_out], n_out))?;
        ensure!(
            (amp - want).norm() <= 1e-12,
            "|{}>|{n_in}> -> amplitude {amp} on |{}>|{n_out}> (want {want})",
            l_in.to_char(),
            l_out.to_char()
        );
    }
    Ok("bus CNOT map exact to 1e-12 (global sign (-1)^p as documented)".into())
}

#[test]
fn acceptance_06_monroe_gate_map() {
    check(6, 1.0, monroe_gate);
}

// 7. Synthesis: W chains of two to eight qubits, the pair concurrence 2/N,
//    one hundred seeded random three-qubit targets, and the 14-parameter
//    budget of the generic network.
fn synthesis_networks() -> Result<String, String> {
    let mut min_w = 1.0f64;
    for n in 2..=8usize {
        let ctx = bench_context(n)?;
        let schedule = ok(compile(&ok(w_state_network(n))?, &ctx))?;
        let mut state = ok(QuantumState::basis(&vec![Level::E; n], 0, 3))?;
        ok(simulate_schedule(&schedule, &mut state, &ctx, None))?;

        let mut target = ok(QuantumState::ground_state(n, 3))?;
        target.amplitudes[0] = Complex64::new(0.0, 0.0);
        let root = 1.0 / (n as f64).sqrt();
        for j in 0..n {
            let mut spins = vec![Level::E; n];
            spins[j] = Level::G;
            let idx = ok(target.basis_index(&spins, 0))?;
            target.amplitudes[idx] = Complex64::new(root, 0.0);
        }
        let fid = ok(fidelity(&state, &target))?;
        ensure!(fid >= 1.0 - 1e-10, "W_{n} fidelity {fid}");
        min_w = min_w.min(fid);

        if n == 8 {
            // The compiled state is only guaranteed to 1e-10 in fidelity, and
            // the concurrence is first order in the amplitude residuals.
            let c = concurrence(&two_qubit_density(&state, 1, 2));
            ensure!((c - 2.0 / 8.0).abs() <= 1e-6, "W_8 pair concurrence {c} (want 0.25)");
        }
    }

    let ctx = bench_context(3)?;
    let mut rng = seeded_rng(700);
    let mut min_t = 1.0f64;
    for round in 0..100 {
        let raw: Vec<f64> = (0..8).map(|_| 0.05 + rng.gen::<f64>()).collect();
        let norm: f64 = raw.iter().map(|a| a * a).sum::<f64>().sqrt();
        let amplitudes: Vec<f64> = raw.iter().map(|a| a / norm).collect();
        let phases: Vec<f64> = (0..8).map(|_| rng.gen::<f64>() * TAU).collect();
        let target = ok(TargetState::new(3, amplitudes, phases))?;

        let schedule = ok(compile(&ok(arbitrary_state_network(&target))?, &ctx))?;
        let mut state = ok(QuantumState::ground_state(3, 3))?;
        ok(simulate_schedule(&schedule, &mut state, &ctx, None))?;

        let mut want = ok(QuantumState::ground_state(3, 3))?;
        want.amplitudes[0] = Complex64::new(0.0, 0.0);
        for i in 0..8usize {
            let spins: Vec<Level> = (0..3)
                .map(|qb| if i >> (2 - qb) & 1 == 1 { Level::E } else { Level::G })
                .collect();
            let idx = ok(want.basis_index(&spins, 0))?;
            want.amplitudes[idx] = Complex64::from_polar(target.amplitudes[i], target.phases[i]);
        }
        let fid = ok(fidelity(&state, &want))?;
        ensure!(fid >= 1.0 - 1e-8, "random target {round}: fidelity {fid}");
        min_t = min_t.min(fid);
    }

    let generic = ok(TargetState::new(
        3,
        vec![(1.0f64 / 8.0).sqrt(); 8],
        (0..8).map(|i| 0.1 * i as f64).collect(),
    ))?;
    let params: usize = ok(arbitrary_state_network(&generic))?
        .iter()
        .map(|gate| match gate {
            GateSpec::Rotation { .. } | GateSpec::ControlledR { .. } => 2,
            GateSpec::ReducedControlledR { .. } => 1,
            _ => 0,
        })
        .sum();
    ensure!(params == 14, "generic three-qubit network carries {params} real parameters");

    Ok(format!(
        "W_2..W_8 worst fidelity 1 - {:.1e} (pair concurrence 2/N); 100 random targets worst 1 - {:.1e}; 14-parameter generic network",
        1.0 - min_w,
        1.0 - min_t
    ))
}

#[test]
fn acceptance_07_state_synthesis() {
    check(7, 30.0, synthesis_networks);
}

// 8. Gate-time table, recoil scales, and the headline gate times. Three
//    T(75%) cells of the reference table are internally inconsistent with
//    T = 2 (T_A + N T_B) as recomputed from their own T_B column; those are
//    pinned to the recomputed values and the discrepancy is asserted.
fn gate_time_budgets() -> Result<String, String> {
    let ca = IonSpecies::ca40();
    let (wavelength, angle, omega_z, t_a) = (729e-9, PI / 3.0, TAU * 700e3, 5e-6);
    let rows = ok(gate_time_table(&ca, wavelength, angle, omega_z, t_a))?;

    struct RefRow {
        n: usize,
        t_b_99: f64,
        t_b_75: f64,
        t_99: f64,
        t_75: f64,
        t_75_consistent: bool,
    }
    let refs = [
        RefRow { n: 2, t_b_99: 124e-6, t_b_75: 24.8e-6, t_99: 0.50e-3, t_75: 0.10e-3, t_75_consistent: false },
        RefRow { n: 3, t_b_99: 152e-6, t_b_75: 30.3e-6, t_99: 0.91e-3, t_75: 0.18e-3, t_75_consistent: false },
        RefRow { n: 6, t_b_99: 214e-6, t_b_75: 42.9e-6, t_99: 2.58e-3, t_75: 0.52e-3, t_75_consistent: true },
        RefRow { n: 9, t_b_99: 263e-6, t_b_75: 52.5e-6, t_99: 4.74e-3, t_75: 0.98e-3, t_75_consistent: false },
        RefRow { n: 10, t_b_99: 277e-6, t_b_75: 55.4e-6, t_99: 5.55e-3, t_75: 1.12e-3, t_75_consistent: true },
    ];
    // 2 (T_A + N T_B(75%)) evaluated once and frozen, N = 2, 3, 9.
    let recomputed_t75 = [108.698e-6, 191.321e-6, 952.169e-6];

    let rel = |got: f64, want: f64| (got - want).abs() / want;
    let mut flagged = Vec::new();
    let mut flag_idx = 0usize;
    for (row, want) in rows.iter().zip(&refs) {
        ensure!(row.n == want.n, "row order: got N={}, want N={}", row.n, want.n);
        ensure!(
            rel(row.t_b_99, want.t_b_99) <= 0.01,
            "N={}: T_B(99%) = {:.6e} vs {:.6e}",
            row.n,
            row.t_b_99,
            want.t_b_99
        );
        ensure!(
            rel(row.t_b_75, want.t_b_75) <= 0.01,
            "N={}: T_B(75%) = {:.6e} vs {:.6e}",
            row.n,
            row.t_b_75,
            want.t_b_75
        );
        ensure!(
            rel(row.t_99, want.t_99) <= 0.01,
            "N={}: T(99%) = {:.6e} vs {:.6e}",
            row.n,
            row.t_99,
            want.t_99
        );
        if want.t_75_consistent {
            ensure!(
                rel(row.t_75, want.t_75) <= 0.01,
                "N={}: T(75%) = {:.6e} vs {:.6e}",
                row.n,
                row.t_75,
                want.t_75
            );
        } else {
            ensure!(
                rel(row.t_75, recomputed_t75[flag_idx]) <= 1e-4,
                "N={}: T(75%) = {:.6e} vs recomputed {:.6e}",
                row.n,
                row.t_75,
                recomputed_t75[flag_idx]
            );
            ensure!(
                rel(row.t_75, want.t_75) > 0.01,
                "N={}: T(75%) unexpectedly matches the quoted {:.6e}",
                row.n,
                want.t_75
            );
            flagged.push(format!(
                "N={} T(75%) {:.1} us vs quoted {:.0} us ({:.1}% apart)",
                row.n,
                row.t_75 * 1e6,
                want.t_75 * 1e6,
                rel(row.t_75, want.t_75) * 100.0
            ));
            flag_idx += 1;
        }
    }

    let timing = ok(timing_report(2, 2, 0.99, wavelength, angle, omega_z, &ca, t_a))?;
    ensure!(
        rel(timing.recoil_frequency, 2330.0) <= 0.01,
        "E_r/h = {:.1} Hz (want 2330 +- 1%)",
        timing.recoil_frequency
    );
    ensure!(rel(timing.eta, 0.06) <= 0.05, "eta = {:.5} (want 0.06 +- 5%)", timing.eta);

    // Headline gate times: two-ion CNOT, CNOT across ten ions, twelve chained
    // two-ion gates on nine ions, six-ion gate.
    ensure!(rel(timing.t_total, 0.5e-3) <= 0.02, "T(N=2, Q=2) = {:.4e} s", timing.t_total);
    let ten = ok(timing_report(10, 2, 0.99, wavelength, angle, omega_z, &ca, t_a))?.t_total;
    ensure!(rel(ten, 1.1e-3) <= 0.02, "T(N=10, Q=2) = {ten:.4e} s");
    let nine12 = 12.0 * ok(timing_report(9, 2, 0.99, wavelength, angle, omega_z, &ca, t_a))?.t_total;
    ensure!(rel(nine12, 12.7e-3) <= 0.02, "12 T(N=9, Q=2) = {nine12:.4e} s");
    let six = ok(timing_report(6, 6, 0.99, wavelength, angle, omega_z, &ca, t_a))?.t_total;
    ensure!(rel(six, 2.6e-3) <= 0.02, "T(N=6, Q=6) = {six:.4e} s");

    Ok(format!(
        "17/20 table cells within 1%; E_r/h = {:.0} Hz, eta = {:.4}; headline times within 2%; FLAGGED (table-internal inconsistency): {}",
        timing.recoil_frequency,
        timing.eta,
        flagged.join("; ")
    ))
}

#[test]
fn acceptance_08_gate_time_table() {
    check(8, 0.1, gate_time_budgets);
}

// 9. Carrier light shift at the reference drive.
fn stark_magnitude() -> Result<String, String> {
    let shift_hz = stark_shift(TAU * 50e3, TAU * 700e3) / TAU;
    ensure!(
        (shift_hz - 1800.0).abs() <= 0.02 * 1800.0,
        "light shift {shift_hz:.1} Hz (want 1800 +- 2%)"
    );
    Ok(format!("light shift {shift_hz:.1} Hz at |lambda|/2pi = 50 kHz, nu/2pi = 700 kHz"))
}

#[test]
fn acceptance_09_stark_shift() {
    check(9, 0.1, stark_magnitude);
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

// 10. Full off-resonant integrator: carrier excitation under a sideband
//     drive, quadratic scaling of carrier-pulse infidelity in lambda/nu, and
//     the location of the dressed-state resonance.
fn full_integrator() -> Result<String, String> {
    let nu = TAU * 500e3;
    let pi_area = ok(PulseArea::new(1, 1))?;

    // Off-resonant carrier excitation of a first-red-sideband drive peaks at
    // (lambda/nu)^2 at t = pi/nu.
    let mut peak_note = String::new();
    for &ratio in &[0.02, 0.05] {
        let ctx = ok(CouplingContext::new(Complex64::new(ratio * nu, 0.0), 0.05, nu))?;
        let pulse = Pulse {
            ion: 1,
            k: -1,
            area: pi_area,
            phase: 0.0,
            transition: Transition::Ge,
            regime: Regime::FullOffresonant,
        };
        let mut state = ok(QuantumState::basis(&[Level::G], 1, 6))?;
        ok(evolve_full(&mut state, &pulse, &ctx, PI / nu, None))?;
        let p = ok(state.amplitude(&[Level::E], 1))?.norm_sqr();
        let predicted = ratio * ratio;
        ensure!(
            (p - predicted).abs() <= 0.10 * predicted,
            "lambda/nu = {ratio}: P_C = {p:.4e}, first-order peak {predicted:.4e}"
        );
        peak_note = format!("P_C = {p:.2e} vs {predicted:.2e} at lambda/nu = {ratio}");
    }

    // Carrier pi-pulse infidelity against the ideal block unitary.
    let mut points = Vec::new();
    for &ratio in &[0.02, 0.05, 0.1] {
        let ctx = ok(CouplingContext::new(Complex64::new(ratio * nu, 0.0), 0.06, nu))?;
        let ideal_pulse = Pulse {
            ion: 1,
            k: 0,
            area: pi_area,
            phase: 0.0,
            transition: Transition::Ge,
            regime: Regime::ExactLaguerre,
        };
        let full_pulse = Pulse { regime: Regime::FullOffresonant, ..ideal_pulse };
        let duration = ok(pulse_duration(&full_pulse, &ctx))?;

        let mut ideal = ok(QuantumState::basis(&[Level::G], 0, 6))?;
        ok(ok(pulse_unitary(&ideal_pulse, &ctx, 6))?.apply(&mut ideal))?;
        let mut state = ok(QuantumState::basis(&[Level::G], 0, 6))?;
        ok(evolve_full(&mut state, &full_pulse, &ctx, duration, None))?;

        let infidelity = 1.0 - ok(fidelity(&state, &ideal))?;
        ensure!(infidelity > 0.0, "no measurable infidelity at lambda/nu = {ratio}");
        points.push((ratio.ln(), infidelity.ln()));
    }
    let fitted = slope(&points);
    ensure!((fitted - 2.0).abs() <= 0.1, "infidelity log-log slope {fitted:.3} (want 2.0 +- 0.1)");

    // Dressed-state resonance: drive the carrier hard from |g,0> and scan
    // lambda for the peak phonon response. The location is reported, not
    // assumed.
    let eta = 0.1;
    let grid: Vec<f64> = (0..39).map(|i| 0.3 + 0.05 * i as f64).collect();
    let mut responses = Vec::with_capacity(grid.len());
    for &frac in &grid {
        let lambda = frac * nu;
        let ctx = ok(CouplingContext::new(Complex64::new(lambda, 0.0), eta, nu))?;
        let pulse = Pulse {
            ion: 1,
            k: 0,
            area: pi_area,
            phase: 0.0,
            transition: Transition::Ge,
            regime: Regime::FullOffresonant,
        };
        let period = TAU / (eta * lambda);
        let mut peak = 0.0f64;
        for &fraction in &[0.25, 0.5, 1.0] {
            let mut state = ok(QuantumState::basis(&[Level::G], 0, 5))?;
            ok(evolve_full(&mut state, &pulse, &ctx, fraction * period, None))?;
            let p1 = ok(state.amplitude(&[Level::G], 1))?.norm_sqr()
                + ok(state.amplitude(&[Level::E], 1))?.norm_sqr();
            peak = peak.max(p1);
        }
        responses.push(peak);
    }
    let best = responses
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    ensure!(
        best > 0 && best < grid.len() - 1,
        "phonon response peaks at the scan edge lambda/nu = {}",
        grid[best]
    );
    ensure!(responses[best] > 0.2, "peak phonon response {:.3} too weak to locate", responses[best]);

    Ok(format!(
        "{peak_note}; infidelity slope {fitted:.2}; dressed resonance at lambda/nu = {:.2} (phonon response {:.2})",
        grid[best], responses[best]
    ))
}

#[test]
fn acceptance_10_full_offresonant_integrator() {
    check(10, 60.0, full_integrator);
}

// 11. Unitarity of every pulse operator and exact 4 pi / 2 pi periodicity.
fn pulse_unitarity() -> Result<String, String> {
    let nu = TAU * 700e3;
    let max_abs = |m: &DMatrix<Complex64>, target: &DMatrix<Complex64>| {
        let mut worst = 0.0f64;
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                worst = worst.max((m[(r, c)] - target[(r, c)]).norm());
            }
        }
        worst
    };
    let eye = DMatrix::<Complex64>::identity(21, 21);

    let mut worst = 0.0f64;
    let mut count = 0usize;
    for &regime in &[Regime::IdealLd, Regime::ExactLaguerre] {
        for &k in &[-2i64, -1, 0, 1, 2] {
            for &eta in &[0.05, 0.1, 0.3] {
                for &(num, den) in &[(1u64, 2u64), (1, 1), (2, 1), (4, 1)] {
                    for &phase in &[0.0, 1.1] {
                        let ctx = ok(CouplingContext::new(Complex64::new(TAU * 20e3, 0.0), eta, nu))?;
                        let pulse = Pulse {
                            ion: 1,
                            k,
                            area: ok(PulseArea::new(num, den))?,
                            phase,
                            transition: Transition::Ge,
                            regime,
                        };
                        let u = ok(pulse_unitary(&pulse, &ctx, 6))?.dense_matrix();
                        worst = worst.max(max_abs(&(u.adjoint() * &u), &eye));
                        count += 1;
                    }
                }
            }
        }
    }
    ensure!(worst <= 1e-12, "worst |U^dag U - 1| = {worst:.3e} over {count} operators");

    let ctx = ok(CouplingContext::new(Complex64::new(TAU * 20e3, 0.0), 0.1, nu))?;
    let carrier = |num: u64| -> Result<DMatrix<Complex64>, String> {
        let pulse = Pulse {
            ion: 1,
            k: 0,
            area: ok(PulseArea::new(num, 1))?,
            phase: 0.3,
            transition: Transition::Ge,
            regime: Regime::IdealLd,
        };
        Ok(ok(pulse_unitary(&pulse, &ctx, 6))?.dense_matrix())
    };
    let dev4 = max_abs(&carrier(4)?, &eye);
    ensure!(dev4 <= 1e-12, "carrier 4 pi deviates from identity by {dev4:.3e}");

    // 2 pi flips every coupled g/e block and leaves the spectator |r> ladder.
    let mut flip = DMatrix::<Complex64>::identity(21, 21);
    for i in 0..14 {
        flip[(i, i)] = Complex64::new(-1.0, 0.0);
    }
    let dev2 = max_abs(&carrier(2)?, &flip);
    ensure!(dev2 <= 1e-12, "carrier 2 pi deviates from the block sign flip by {dev2:.3e}");

    // First red sideband: the timing block |g,1> <-> |e,0| returns at 4 pi,
    // flips at 2 pi, and the kernel |g,0> is untouched.
    let red = |num: u64| -> Result<DMatrix<Complex64>, String> {
        let pulse = Pulse {
            ion: 1,
            k: -1,
            area: ok(PulseArea::new(num, 1))?,
            phase: 0.9,
            transition: Transition::Ge,
            regime: Regime::ExactLaguerre,
        };
        Ok(ok(pulse_unitary(&pulse, &ctx, 6))?.dense_matrix())
    };
    let (ig0, ig1, ie0) = (0usize, 1usize, 7usize);
    let u4 = red(4)?;
    let u2 = red(2)?;
    for (name, u, sign) in [("4 pi", &u4, 1.0), ("2 pi", &u2, -1.0)] {
        for &(r, c, want) in &[
            (ig1, ig1, sign),
            (ie0, ie0, sign),
            (ig1, ie0, 0.0),
            (ie0, ig1, 0.0),
            (ig0, ig0, 1.0),
        ] {
            let got = u[(r, c)];
            ensure!(
                (got - Complex64::new(want, 0.0)).norm() <= 1e-12,
                "red {name}: entry ({r}, {c}) = {got} (want {want})"
            );
        }
    }

    Ok(format!("{count} operators unitary to {worst:.1e}; 4 pi identity and 2 pi sign flip exact"))
}

#[test]
fn acceptance_11_unitarity_and_periodicity() {
    check(11, 5.0, pulse_unitarity);
}

// 12. Absorption spectra: the sideband sum rule and the two-ion Lamb-Dicke
//     spectrum carrying only first sidebands at +-omega_z and +-sqrt(3)
//     omega_z above one percent of the carrier.
fn spectra() -> Result<String, String> {
    let occupation = ok(thermal_occupation(0.2, 40))?;
    let lines = ok(absorption_lines(&[ModeSpec { eta: 0.1, nu: TAU * 700e3, occupation }], 10))?;
    let total: f64 = lines.iter().map(|l| l.weight).sum();
    ensure!((total - 1.0).abs() <= 1e-10, "sum rule: total weight {total:.12}");

    let ca = IonSpecies::ca40();
    let omega_z = TAU * 100e3;
    let spectrum = ok(normal_modes(&ok(equilibrium_positions(2, &ca, omega_z))?))?;
    ensure!(
        (spectrum.nu[0] - omega_z).abs() <= 1e-10 * omega_z,
        "COM mode at {} omega_z",
        spectrum.nu[0] / omega_z
    );
    ensure!(
        (spectrum.nu[1] - 3f64.sqrt() * omega_z).abs() <= 1e-10 * omega_z,
        "breathing mode at {} omega_z",
        spectrum.nu[1] / omega_z
    );

    // Aim the beam so the single-ion Lamb-Dicke scale is 0.2, then build both
    // modes with their real per-ion parameters at nbar = 1.
    let wavelength = 729e-9;
    let eta_bar_max = TAU / wavelength * spectrum.z0;
    ensure!(eta_bar_max > 0.2, "beam cannot reach eta = 0.2 at this confinement");
    let laser = ok(LaserConfig::travelling(wavelength, (0.2 / eta_bar_max).acos(), TAU * 20e3))?;
    let eta_com = ok(lamb_dicke_parameters(&spectrum, &laser, 0))?[0].abs();
    let eta_br = ok(lamb_dicke_parameters(&spectrum, &laser, 1))?[0].abs();

    let occ = ok(thermal_occupation(1.0, 30))?;
    let modes = [
        ModeSpec { eta: eta_com, nu: spectrum.nu[0], occupation: occ.clone() },
        ModeSpec { eta: eta_br, nu: spectrum.nu[1], occupation: occ },
    ];
    let lines = ok(absorption_lines(&modes, 2))?;
    let carrier = lines
        .iter()
        .find(|l| l.orders.iter().all(|&k| k == 0))
        .ok_or("no carrier line in the spectrum")?;
    let mut strong: Vec<&SpectralLine> = lines
        .iter()
        .filter(|l| l.delta.abs() > 1e-6 * omega_z && l.weight > 0.01 * carrier.weight)
        .collect();
    strong.sort_by(|a, b| a.delta.total_cmp(&b.delta));

    let deltas: Vec<f64> = strong.iter().map(|l| l.delta / omega_z).collect();
    ensure!(strong.len() == 4, "{} lines above 1% of the carrier: {deltas:?}", strong.len());
    let want = [-(3f64.sqrt()), -1.0, 1.0, 3f64.sqrt()];
    for (line, w) in strong.iter().zip(want) {
        ensure!(
            (line.delta - w * omega_z).abs() <= 1e-9 * omega_z,
            "sideband at {:.6} omega_z (want {w:.6})",
            line.delta / omega_z
        );
        let order: i64 = line.orders.iter().map(|k| k.abs()).sum();
        ensure!(order == 1, "line {:?} above threshold is not a first sideband", line.orders);
    }

    Ok(format!(
        "sum rule |total - 1| = {:.1e}; two-ion spectrum shows exactly the four first sidebands at -sqrt3, -1, +1, +sqrt3 omega_z above 1% of the carrier",
        (total - 1.0).abs()
    ))
}

#[test]
fn acceptance_12_absorption_spectra() {
    check(12, 5.0, spectra);
}
